#include "bcfl/anchoring.hpp"

#include <iostream>

#include "bcfl/errors.hpp"

namespace bcfl {

std::string canonicalize(const Record& record) {
  validate(record);
  std::string out;
  for (double f : record.features) {
    out += format_number(f);
    out += ',';
  }
  out += record.label == 1 ? '1' : '0';
  return out;
}

Digest leaf_hash(const Record& record) { return sha256(canonicalize(record)); }

MerkleTree build_merkle(std::span<const Record> records) {
  if (records.empty()) throw ContractViolation("cannot build a Merkle tree over zero records");
  MerkleTree tree;
  std::vector<Digest> level;
  level.reserve(records.size());
  for (const Record& r : records) level.push_back(leaf_hash(r));
  tree.levels.push_back(std::move(level));

  while (tree.levels.back().size() > 1) {
    const std::vector<Digest>& nodes = tree.levels.back();
    std::vector<Digest> parents;
    parents.reserve((nodes.size() + 1) / 2);
    for (std::size_t k = 0; k < nodes.size(); k += 2) {
      const Digest& left = nodes[k];
      const Digest& right = k + 1 < nodes.size() ? nodes[k + 1] : left;
      parents.push_back(sha256_pair(left, right));
    }
    tree.levels.push_back(std::move(parents));
  }
  return tree;
}

Digest merkle_root(std::span<const Record> records) { return build_merkle(records).root(); }

std::vector<AnchorPeriod> schedule_periods(const std::string& client_id,
                                           std::uint64_t total_records,
                                           std::uint64_t period_length) {
  if (period_length == 0) throw ContractViolation("anchoring period length must be positive");
  std::vector<AnchorPeriod> out;
  std::uint64_t id = 1;
  for (std::uint64_t start = 0; start < total_records; start += period_length, ++id) {
    out.push_back({id, start, std::min(start + period_length, total_records), client_id});
  }
  return out;
}

std::optional<Receipt> anchor_period(Ledger& ledger, const AnchorPeriod& period,
                                     std::span<const Record> records) {
  if (records.size() != period.record_count()) {
    throw ContractViolation("period " + std::to_string(period.period_id) + " of " +
                            period.client_id + " spans " + std::to_string(period.record_count()) +
                            " records but " + std::to_string(records.size()) + " were given");
  }
  if (records.empty()) {
    std::clog << "anchoring: period " << period.period_id << " of " << period.client_id
              << " is empty, skipped\n";
    return std::nullopt;
  }
  return ledger.submit(period.client_id,
                       AnchorRoot{period.period_id, period.end, merkle_root(records)});
}

DisputeOutcome resolve_dispute(const Ledger& ledger, const std::string& client_id,
                               std::uint64_t period_id, std::span<const Record> claimed_records) {
  const RootEntry anchored = ledger.query_root(client_id, period_id);
  DisputeOutcome out;
  out.anchored_root = anchored.root;
  if (!claimed_records.empty()) out.recomputed_root = merkle_root(claimed_records);
  out.verified = !claimed_records.empty() && out.recomputed_root == out.anchored_root;
  return out;
}

}  // namespace bcfl
