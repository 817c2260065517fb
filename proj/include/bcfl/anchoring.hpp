#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bcfl/hash.hpp"
#include "bcfl/ledger.hpp"
#include "bcfl/record.hpp"

namespace bcfl {

/// Comma-separated shortest round-trip features followed by the label,
/// no whitespace. Leaf preimage of the Merkle tree.
std::string canonicalize(const Record& record);

Digest leaf_hash(const Record& record);

/// Binary SHA-256 tree over records in collection order. An unpaired node at
/// the end of a level is hashed with itself.
struct MerkleTree {
  /// levels.front() holds the leaves, levels.back() the single root.
  std::vector<std::vector<Digest>> levels;

  const std::vector<Digest>& leaves() const { return levels.front(); }
  const Digest& root() const { return levels.back().front(); }
};

/// Throws ContractViolation on an empty record list.
MerkleTree build_merkle(std::span<const Record> records);

/// Shortcut for build_merkle(records).root().
Digest merkle_root(std::span<const Record> records);

/// One client's anchoring window over its record stream. A record's index in
/// the stream is its logical collection time, so the window covers records
/// [start, end) and is stamped on-chain with `end`.
struct AnchorPeriod {
  std::uint64_t period_id = 0;
  std::uint64_t start = 0;
  std::uint64_t end = 0;
  std::string client_id;

  std::uint64_t record_count() const noexcept { return end - start; }
};

/// Splits a stream of `total_records` into contiguous periods of
/// `period_length` records, numbered from 1. The last period may be short.
std::vector<AnchorPeriod> schedule_periods(const std::string& client_id,
                                           std::uint64_t total_records,
                                           std::uint64_t period_length);

/// Builds the period's tree and submits an AnchorRoot transaction stamped
/// with the period end. Empty periods are skipped and return nullopt.
/// The root becomes queryable after the next seal.
std::optional<Receipt> anchor_period(Ledger& ledger, const AnchorPeriod& period,
                                     std::span<const Record> records);

struct DisputeOutcome {
  bool verified = false;
  Digest recomputed_root{};
  Digest anchored_root{};
};

/// Recomputes the root of `claimed_records` and compares it with the root
/// anchored on-chain for (client_id, period_id). Throws NotFound when no
/// anchor exists.
DisputeOutcome resolve_dispute(const Ledger& ledger, const std::string& client_id,
                               std::uint64_t period_id, std::span<const Record> claimed_records);

}  // namespace bcfl
