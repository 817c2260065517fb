#include "bcfl/ledger.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>

#include "json.hpp"

#include "bcfl/errors.hpp"

namespace bcfl {

using json = nlohmann::json;

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr Digest kZeroDigest{};

}  // namespace

std::string_view payload_type(const Payload& payload) {
  return std::visit(overloaded{
                        [](const AnchorRoot&) { return std::string_view("anchor_root"); },
                        [](const RegisterSelection&) { return std::string_view("register_selection"); },
                        [](const UpdateStatus&) { return std::string_view("update_status"); },
                        [](const IncentivePayout&) { return std::string_view("incentive_payout"); },
                        [](const ChainParams&) { return std::string_view("chain_params"); },
                        [](const RegisterOrganization&) { return std::string_view("register_organization"); },
                    },
                    payload);
}

std::vector<std::uint8_t> Transaction::canonical_encoding() const {
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(payload.index()));
  w.str(sender);
  w.u64(timestamp);
  std::visit(overloaded{
                 [&](const AnchorRoot& p) {
                   w.u64(p.period_id);
                   w.u64(p.period_time);
                   w.bytes(p.root);
                 },
                 [&](const RegisterSelection& p) {
                   w.u64(p.round_no);
                   w.u32(static_cast<std::uint32_t>(p.clients.size()));
                   for (const auto& c : p.clients) w.str(c);
                 },
                 [&](const UpdateStatus& p) {
                   w.u64(p.round_no);
                   w.u64(p.data_size);
                   w.f64(p.distance);
                 },
                 [&](const IncentivePayout& p) {
                   w.str(p.client);
                   w.u64(p.round_no);
                   w.f64(p.tokens);
                 },
                 [&](const ChainParams& p) {
                   w.str(p.coordinator);
                   w.u64(p.pow_difficulty);
                   w.f64(p.incentive_c);
                 },
                 [&](const RegisterOrganization& p) { w.str(p.address); },
             },
             payload);
  return std::move(w).take();
}

Digest Transaction::compute_id() const { return sha256(canonical_encoding()); }

Transaction Transaction::make(std::string sender, std::uint64_t timestamp, Payload payload) {
  Transaction tx{{}, std::move(sender), timestamp, std::move(payload)};
  tx.tx_id = tx.compute_id();
  return tx;
}

namespace {

// Everything hashed into a block except the trailing nonce.
std::vector<std::uint8_t> block_prefix(const Block& b) {
  ByteWriter w;
  w.u64(b.height);
  w.digest(b.prev_hash);
  w.u32(static_cast<std::uint32_t>(b.txs.size()));
  for (const auto& tx : b.txs) w.bytes(tx.canonical_encoding());
  return std::move(w).take();
}

void put_u64_be(std::vector<std::uint8_t>& buf, std::size_t at, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf[at + static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(v >> (56 - 8 * i));
}

}  // namespace

Digest Block::compute_hash() const {
  std::vector<std::uint8_t> buf = block_prefix(*this);
  const std::size_t at = buf.size();
  buf.resize(at + 8);
  put_u64_be(buf, at, nonce);
  return sha256(buf);
}

std::optional<Digest> pow_target(std::uint64_t difficulty) {
  if (difficulty <= 1) return std::nullopt;
  // Long division of 2^256 (a 1 followed by 32 zero bytes) by difficulty.
  __extension__ using u128 = unsigned __int128;
  Digest q{};
  u128 rem = 1;
  for (std::size_t i = 0; i < 32; ++i) {
    const u128 cur = (rem << 8);
    q[i] = static_cast<std::uint8_t>(cur / difficulty);
    rem = cur % difficulty;
  }
  return q;
}

bool meets_target(const Digest& hash, const std::optional<Digest>& target) {
  if (!target) return true;
  return std::lexicographical_compare(hash.begin(), hash.end(), target->begin(), target->end());
}

// --- contract state ---------------------------------------------------------

void ContractState::apply(const Transaction& tx) {
  auto reject = [&](const std::string& why) {
    throw LedgerRejection(std::string(payload_type(tx.payload)) + " from " + tx.sender + ": " + why);
  };

  if (const auto* p = std::get_if<ChainParams>(&tx.payload)) {
    if (!coordinator.empty()) reject("chain parameters are already set");
    if (p->coordinator.empty()) reject("coordinator address must not be empty");
    if (tx.sender != p->coordinator) reject("chain parameters must be sent by the coordinator");
    if (!(p->incentive_c >= 0.0) || !std::isfinite(p->incentive_c)) {
      reject("incentive constant must be finite and non-negative");
    }
    coordinator = p->coordinator;
    pow_difficulty = p->pow_difficulty;
    incentive_c = p->incentive_c;
    organizations = {p->coordinator};
    return;
  }
  if (coordinator.empty()) reject("chain parameters are not set");
  if (!is_registered(tx.sender)) reject("sender is not a registered organization");

  std::visit(
      overloaded{
          [&](const ChainParams&) {},
          [&](const RegisterOrganization& p) {
            if (tx.sender != coordinator) reject("only the coordinator may register organizations");
            if (p.address.empty()) reject("organization address must not be empty");
            if (is_registered(p.address)) reject(p.address + " is already registered");
            organizations.push_back(p.address);
          },
          [&](const AnchorRoot& p) {
            const AddressRound key{tx.sender, p.period_id};
            if (roots.contains(key)) {
              reject("period " + std::to_string(p.period_id) + " already anchored");
            }
            roots.emplace(key, RootEntry{p.root, p.period_time});
          },
          [&](const RegisterSelection& p) {
            if (tx.sender != coordinator) reject("only the coordinator may post selection lists");
            if (p.round_no == 0) reject("round numbers start at 1");
            if (p.clients.empty()) reject("selection list is empty");
            for (const auto& c : p.clients) {
              if (!is_registered(c)) reject("selection names unregistered client " + c);
            }
            std::set<std::string> unique(p.clients.begin(), p.clients.end());
            if (unique.size() != p.clients.size()) reject("selection list has duplicates");
            if (selections.contains(p.round_no)) {
              reject("round " + std::to_string(p.round_no) + " already has a selection list");
            }
            selections.emplace(p.round_no, p.clients);
          },
          [&](const UpdateStatus& p) {
            const auto sel = selections.find(p.round_no);
            if (sel == selections.end() ||
                std::find(sel->second.begin(), sel->second.end(), tx.sender) == sel->second.end()) {
              reject("not in the selection list of round " + std::to_string(p.round_no));
            }
            if (p.data_size == 0) reject("data size must be positive");
            if (!(p.distance > 0.0) || !std::isfinite(p.distance)) {
              reject("distance must be finite and positive");
            }
            const AddressRound key{tx.sender, p.round_no};
            if (contri.contains(key)) {
              reject("status for round " + std::to_string(p.round_no) + " already recorded");
            }
            contri.emplace(key, Contribution{true, p.data_size, p.distance, false});
          },
          [&](const IncentivePayout& p) {
            if (tx.sender != p.client) reject("payout must be claimed by its recipient");
            const auto sel = selections.find(p.round_no);
            if (sel == selections.end() ||
                std::find(sel->second.begin(), sel->second.end(), p.client) == sel->second.end()) {
              reject("not in the selection list of round " + std::to_string(p.round_no));
            }
            const auto it = contri.find({p.client, p.round_no});
            if (it == contri.end() || !it->second.finished) {
              reject("no finished contribution for round " + std::to_string(p.round_no));
            }
            if (it->second.paid) reject("round " + std::to_string(p.round_no) + " already paid");
            if (p.tokens != reward(it->second)) reject("token amount does not match contribution");
            it->second.paid = true;
            tokens[p.client] += p.tokens;
          },
      },
      tx.payload);
}

bool ContractState::is_registered(const std::string& address) const {
  return std::find(organizations.begin(), organizations.end(), address) != organizations.end();
}

// --- verification -------------------------------------------------------------

VerifyResult verify_blocks(std::span<const Block> blocks, const ContractState* cached) {
  ContractState state;
  std::set<Digest> ids;

  if (blocks.empty()) return {false, 0, "chain has no genesis block"};

  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const Block& b = blocks[i];
    auto fail = [&](const std::string& why) { return VerifyResult{false, i, why}; };
    if (b.height != i) return fail("height field is " + std::to_string(b.height));
    const Digest& expected_prev = i == 0 ? kZeroDigest : blocks[i - 1].block_hash;
    if (b.prev_hash != expected_prev) return fail("prev_hash does not link to the previous block");
    if (b.compute_hash() != b.block_hash) return fail("block hash mismatch");
    if (i == 0 && (b.txs.empty() || !std::holds_alternative<ChainParams>(b.txs.front().payload))) {
      return fail("genesis does not start with the chain parameters");
    }
    for (const Transaction& tx : b.txs) {
      if (tx.compute_id() != tx.tx_id) return fail("transaction id mismatch");
      if (!ids.insert(tx.tx_id).second) return fail("duplicate transaction id");
      try {
        state.apply(tx);
      } catch (const LedgerRejection& e) {
        return fail(std::string("contract rejected: ") + e.what());
      }
    }
    if (!meets_target(b.block_hash, pow_target(state.pow_difficulty))) {
      return fail("block hash above the PoW target");
    }
  }
  if (cached && *cached != state) {
    return {false, blocks.size() - 1, "cached contract state differs from replay"};
  }
  return {};
}

ContractState replay(std::span<const Block> blocks) {
  ContractState state;
  for (const Block& b : blocks) {
    for (const Transaction& tx : b.txs) state.apply(tx);
  }
  return state;
}

// --- ledger -------------------------------------------------------------------

Ledger::Ledger(LedgerConfig config)
    : config_(std::move(config)),
      target_(pow_target(config_.pow_difficulty)),
      mu_(std::make_unique<std::shared_mutex>()) {
  if (config_.coordinator.empty()) throw ContractViolation("coordinator address must not be empty");
  if (!(config_.incentive_c >= 0.0) || !std::isfinite(config_.incentive_c)) {
    throw ContractViolation("incentive constant C must be finite and non-negative");
  }
  std::vector<std::string> members{config_.coordinator};
  for (const auto& org : config_.organizations) {
    if (org.empty()) throw ContractViolation("organization address must not be empty");
    if (org == config_.coordinator) continue;
    if (std::find(members.begin(), members.end(), org) != members.end()) {
      throw ContractViolation("organization list has duplicates");
    }
    members.push_back(org);
  }
  config_.organizations = members;

  Block genesis;
  genesis.txs.push_back(Transaction::make(
      config_.coordinator, clock_++,
      ChainParams{config_.coordinator, config_.pow_difficulty, config_.incentive_c}));
  for (std::size_t i = 1; i < members.size(); ++i) {
    genesis.txs.push_back(
        Transaction::make(config_.coordinator, clock_++, RegisterOrganization{members[i]}));
  }
  for (const auto& tx : genesis.txs) {
    state_.apply(tx);
    tx_ids_.insert(tx.tx_id);
  }
  pending_state_ = state_;
  blocks_.push_back(mine(std::move(genesis)));
  for (const auto& org : members) replicas_[org] = blocks_;
}

Ledger::Ledger(std::vector<Block> blocks, ContractState state)
    : blocks_(std::move(blocks)), state_(std::move(state)), mu_(std::make_unique<std::shared_mutex>()) {
  config_ = LedgerConfig{state_.coordinator, state_.organizations, state_.pow_difficulty,
                         state_.incentive_c};
  target_ = pow_target(config_.pow_difficulty);
  pending_state_ = state_;
  for (const auto& org : config_.organizations) replicas_[org] = blocks_;
  for (const auto& b : blocks_) {
    for (const auto& tx : b.txs) {
      tx_ids_.insert(tx.tx_id);
      clock_ = std::max(clock_, tx.timestamp + 1);
    }
  }
}

Block Ledger::mine(Block block) const {
  std::vector<std::uint8_t> buf = block_prefix(block);
  const std::size_t at = buf.size();
  buf.resize(at + 8);
  for (std::uint64_t nonce = 0;; ++nonce) {
    put_u64_be(buf, at, nonce);
    const Digest h = sha256(buf);
    if (meets_target(h, target_)) {
      block.nonce = nonce;
      block.block_hash = h;
      return block;
    }
  }
}

void Ledger::register_organization(const std::string& address) {
  if (address.empty()) throw ContractViolation("organization address must not be empty");
  if (is_registered(address)) return;
  submit(config_.coordinator, RegisterOrganization{address});
  std::unique_lock lock(*mu_);
  config_.organizations.push_back(address);
  replicas_[address] = blocks_;
}

bool Ledger::is_registered(const std::string& address) const {
  std::shared_lock lock(*mu_);
  return pending_state_.is_registered(address);
}

Transaction Ledger::make_transaction(std::string sender, Payload payload) {
  std::unique_lock lock(*mu_);
  return Transaction::make(std::move(sender), clock_++, std::move(payload));
}

Receipt Ledger::submit(const Transaction& tx) {
  std::unique_lock lock(*mu_);
  if (!pending_state_.is_registered(tx.sender)) {
    throw LedgerRejection("unregistered sender " + tx.sender);
  }
  if (tx.compute_id() != tx.tx_id) throw LedgerRejection("transaction id does not match its payload");
  if (tx_ids_.contains(tx.tx_id)) throw LedgerRejection("duplicate transaction id " + to_hex(tx.tx_id));

  ContractState next = pending_state_;
  next.apply(tx);
  pending_state_ = std::move(next);
  tx_ids_.insert(tx.tx_id);
  clock_ = std::max(clock_, tx.timestamp + 1);
  pending_.push_back(tx);
  return Receipt{blocks_.size(), static_cast<std::uint32_t>(pending_.size() - 1)};
}

const Block& Ledger::seal_block() {
  std::unique_lock lock(*mu_);
  Block b;
  b.height = blocks_.size();
  b.prev_hash = blocks_.back().block_hash;
  b.txs = std::move(pending_);
  pending_.clear();
  b = mine(std::move(b));
  blocks_.push_back(b);
  for (auto& [org, chain] : replicas_) chain.push_back(b);
  state_ = pending_state_;
  return blocks_.back();
}

VerifyResult Ledger::verify_chain() const {
  std::shared_lock lock(*mu_);
  return verify_blocks(blocks_, &state_);
}

std::uint64_t Ledger::height() const {
  std::shared_lock lock(*mu_);
  return blocks_.size() - 1;
}

std::size_t Ledger::pending_count() const {
  std::shared_lock lock(*mu_);
  return pending_.size();
}

RootEntry Ledger::query_root(const std::string& address, std::uint64_t period_id) const {
  std::shared_lock lock(*mu_);
  const auto it = state_.roots.find({address, period_id});
  if (it == state_.roots.end()) {
    throw NotFound("no root anchored by " + address + " for period " + std::to_string(period_id));
  }
  return it->second;
}

double Ledger::query_tokens(const std::string& address) const {
  std::shared_lock lock(*mu_);
  if (!state_.is_registered(address)) throw NotFound("unknown address " + address);
  const auto it = state_.tokens.find(address);
  return it == state_.tokens.end() ? 0.0 : it->second;
}

Contribution Ledger::query_contri(const std::string& address, std::uint64_t round_no) const {
  std::shared_lock lock(*mu_);
  const auto it = state_.contri.find({address, round_no});
  if (it == state_.contri.end()) {
    throw NotFound("no contribution from " + address + " in round " + std::to_string(round_no));
  }
  return it->second;
}

const std::vector<Block>& Ledger::replica(const std::string& organization) const {
  std::shared_lock lock(*mu_);
  const auto it = replicas_.find(organization);
  if (it == replicas_.end()) throw NotFound("no replica for " + organization);
  return it->second;
}

bool Ledger::replicas_consistent() const {
  std::shared_lock lock(*mu_);
  return std::all_of(replicas_.begin(), replicas_.end(),
                     [&](const auto& kv) { return kv.second == blocks_; });
}

// --- snapshot -------------------------------------------------------------------

namespace {

json payload_to_json(const Payload& payload) {
  json j;
  j["type"] = payload_type(payload);
  std::visit(overloaded{
                 [&](const AnchorRoot& p) {
                   j["period_id"] = p.period_id;
                   j["period_time"] = p.period_time;
                   j["root"] = to_hex(p.root);
                 },
                 [&](const RegisterSelection& p) {
                   j["round_no"] = p.round_no;
                   j["clients"] = p.clients;
                 },
                 [&](const UpdateStatus& p) {
                   j["round_no"] = p.round_no;
                   j["data_size"] = p.data_size;
                   j["distance"] = p.distance;
                 },
                 [&](const IncentivePayout& p) {
                   j["client"] = p.client;
                   j["round_no"] = p.round_no;
                   j["tokens"] = p.tokens;
                 },
                 [&](const ChainParams& p) {
                   j["coordinator"] = p.coordinator;
                   j["pow_difficulty"] = p.pow_difficulty;
                   j["incentive_c"] = p.incentive_c;
                 },
                 [&](const RegisterOrganization& p) { j["address"] = p.address; },
             },
             payload);
  return j;
}

Payload payload_from_json(const json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "anchor_root") {
    return AnchorRoot{j.at("period_id").get<std::uint64_t>(), j.at("period_time").get<std::uint64_t>(),
                      digest_from_hex(j.at("root").get<std::string>())};
  }
  if (type == "register_selection") {
    return RegisterSelection{j.at("round_no").get<std::uint64_t>(),
                             j.at("clients").get<std::vector<std::string>>()};
  }
  if (type == "update_status") {
    return UpdateStatus{j.at("round_no").get<std::uint64_t>(), j.at("data_size").get<std::uint64_t>(),
                        j.at("distance").get<double>()};
  }
  if (type == "incentive_payout") {
    return IncentivePayout{j.at("client").get<std::string>(), j.at("round_no").get<std::uint64_t>(),
                           j.at("tokens").get<double>()};
  }
  if (type == "chain_params") {
    return ChainParams{j.at("coordinator").get<std::string>(), j.at("pow_difficulty").get<std::uint64_t>(),
                       j.at("incentive_c").get<double>()};
  }
  if (type == "register_organization") return RegisterOrganization{j.at("address").get<std::string>()};
  throw DecodeError("unknown payload type '" + type + "'");
}

json state_to_json(const ContractState& s) {
  json roots = json::array();
  for (const auto& [key, entry] : s.roots) {
    roots.push_back({{"address", key.first},
                     {"period_id", key.second},
                     {"period_time", entry.period_time},
                     {"root", to_hex(entry.root)}});
  }
  json selections = json::array();
  for (const auto& [round, clients] : s.selections) {
    selections.push_back({{"round_no", round}, {"clients", clients}});
  }
  json contri = json::array();
  for (const auto& [key, c] : s.contri) {
    contri.push_back({{"address", key.first},
                      {"round_no", key.second},
                      {"finished", c.finished},
                      {"data_size", c.data_size},
                      {"distance", c.distance},
                      {"paid", c.paid}});
  }
  json tokens = json::array();
  for (const auto& [addr, balance] : s.tokens) {
    tokens.push_back({{"address", addr}, {"balance", balance}});
  }
  return {{"coordinator", s.coordinator},
          {"incentive_c", s.incentive_c},
          {"pow_difficulty", s.pow_difficulty},
          {"organizations", s.organizations},
          {"root_registry", roots},
          {"selections", selections},
          {"contributions", contri},
          {"tokens", tokens}};
}

ContractState state_from_json(const json& j) {
  ContractState s;
  s.coordinator = j.at("coordinator").get<std::string>();
  s.incentive_c = j.at("incentive_c").get<double>();
  s.pow_difficulty = j.at("pow_difficulty").get<std::uint64_t>();
  s.organizations = j.at("organizations").get<std::vector<std::string>>();
  for (const auto& r : j.at("root_registry")) {
    s.roots[{r.at("address").get<std::string>(), r.at("period_id").get<std::uint64_t>()}] =
        RootEntry{digest_from_hex(r.at("root").get<std::string>()), r.at("period_time").get<std::uint64_t>()};
  }
  for (const auto& r : j.at("selections")) {
    s.selections[r.at("round_no").get<std::uint64_t>()] = r.at("clients").get<std::vector<std::string>>();
  }
  for (const auto& r : j.at("contributions")) {
    s.contri[{r.at("address").get<std::string>(), r.at("round_no").get<std::uint64_t>()}] =
        Contribution{r.at("finished").get<bool>(), r.at("data_size").get<std::uint64_t>(),
                     r.at("distance").get<double>(), r.at("paid").get<bool>()};
  }
  for (const auto& r : j.at("tokens")) {
    s.tokens[r.at("address").get<std::string>()] = r.at("balance").get<double>();
  }
  return s;
}

}  // namespace

std::string Ledger::snapshot_json() const {
  std::shared_lock lock(*mu_);
  json blocks = json::array();
  for (const Block& b : blocks_) {
    json txs = json::array();
    for (const Transaction& tx : b.txs) {
      txs.push_back({{"tx_id", to_hex(tx.tx_id)},
                     {"sender", tx.sender},
                     {"timestamp", tx.timestamp},
                     {"payload", payload_to_json(tx.payload)}});
    }
    blocks.push_back({{"height", b.height},
                      {"prev_hash", to_hex(b.prev_hash)},
                      {"nonce", b.nonce},
                      {"block_hash", to_hex(b.block_hash)},
                      {"txs", txs}});
  }
  json root = {{"format", "bcfl-chain-v1"},
               {"blocks", blocks},
               {"state", state_to_json(state_)}};
  return root.dump(1) + "\n";
}

void Ledger::save_snapshot(const std::filesystem::path& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f << snapshot_json();
  if (!f) throw std::runtime_error("failed writing " + path.string());
}

namespace {

// Where a decode failure sits: ahead of the blocks, inside block `index`, or
// after the last block.
struct SnapshotDamage : DecodeError {
  enum class Where { Head, Block, Tail };
  SnapshotDamage(Where w, std::size_t i, const std::string& what) : DecodeError(what), where(w), index(i) {}
  Where where;
  std::size_t index;
};

struct DecodedSnapshot {
  std::vector<Block> blocks;
  ContractState state;
};

DecodedSnapshot decode_snapshot(std::string_view text) {
  using W = SnapshotDamage::Where;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw SnapshotDamage(W::Head, 0, std::string("malformed chain snapshot: ") + e.what());
  }
  DecodedSnapshot out;
  if (!j.is_object() || !j.contains("blocks") || !j.at("blocks").is_array()) {
    throw SnapshotDamage(W::Head, 0, "snapshot has no block list");
  }
  const json& jblocks = j.at("blocks");
  for (std::size_t i = 0; i < jblocks.size(); ++i) {
    try {
      const json& jb = jblocks.at(i);
      Block b;
      b.height = jb.at("height").get<std::uint64_t>();
      b.prev_hash = digest_from_hex(jb.at("prev_hash").get<std::string>());
      b.nonce = jb.at("nonce").get<std::uint64_t>();
      b.block_hash = digest_from_hex(jb.at("block_hash").get<std::string>());
      for (const auto& jt : jb.at("txs")) {
        Transaction tx;
        tx.tx_id = digest_from_hex(jt.at("tx_id").get<std::string>());
        tx.sender = jt.at("sender").get<std::string>();
        tx.timestamp = jt.at("timestamp").get<std::uint64_t>();
        tx.payload = payload_from_json(jt.at("payload"));
        b.txs.push_back(std::move(tx));
      }
      out.blocks.push_back(std::move(b));
    } catch (const json::exception& e) {
      throw SnapshotDamage(W::Block, i, "block " + std::to_string(i) + ": " + e.what());
    } catch (const DecodeError& e) {
      throw SnapshotDamage(W::Block, i, "block " + std::to_string(i) + ": " + e.what());
    }
  }
  if (out.blocks.empty()) throw SnapshotDamage(W::Head, 0, "snapshot has no blocks");
  try {
    if (j.at("format") != "bcfl-chain-v1") throw DecodeError("unsupported snapshot format");
    out.state = state_from_json(j.at("state"));
  } catch (const json::exception& e) {
    throw SnapshotDamage(W::Tail, 0, std::string("malformed snapshot state: ") + e.what());
  } catch (const DecodeError& e) {
    throw SnapshotDamage(W::Tail, 0, e.what());
  }
  return out;
}

// Follows the parse far enough to tell which block a byte offset falls in.
struct BlockLocator : nlohmann::json_sax<json> {
  int depth = 0;
  std::string section;
  std::size_t blocks_done = 0;
  bool in_block = false;

  bool null() override { return true; }
  bool boolean(bool) override { return true; }
  bool number_integer(number_integer_t) override { return true; }
  bool number_unsigned(number_unsigned_t) override { return true; }
  bool number_float(number_float_t, const string_t&) override { return true; }
  bool string(string_t&) override { return true; }
  bool binary(binary_t&) override { return true; }
  bool start_object(std::size_t) override {
    ++depth;
    if (depth == 3 && section == "blocks") in_block = true;
    return true;
  }
  bool key(string_t& k) override {
    if (depth == 1) section = k;
    return true;
  }
  bool end_object() override {
    if (depth == 3 && section == "blocks") {
      ++blocks_done;
      in_block = false;
    }
    --depth;
    return true;
  }
  bool start_array(std::size_t) override {
    ++depth;
    return true;
  }
  bool end_array() override {
    --depth;
    return true;
  }
  bool parse_error(std::size_t, const std::string&, const nlohmann::detail::exception&) override {
    return false;
  }
};

// Height of the block containing the point where parsing `prefix` stops;
// `rest` is the text after that point.
std::uint64_t locate_height(std::string_view prefix, std::string_view rest) {
  BlockLocator loc;
  json::sax_parse(prefix, &loc);
  if (loc.section.empty() || loc.in_block) return loc.blocks_done;
  if (loc.section == "blocks" && rest.find("\"block_hash\"") != std::string_view::npos) {
    return loc.blocks_done;
  }
  return loc.blocks_done == 0 ? 0 : loc.blocks_done - 1;
}

}  // namespace

VerifyResult verify_snapshot(std::string_view text) {
  using W = SnapshotDamage::Where;
  DecodedSnapshot snap;
  try {
    snap = decode_snapshot(text);
  } catch (const SnapshotDamage& e) {
    std::uint64_t height = 0;
    if (e.where == W::Block) {
      height = e.index;
    } else if (e.where == W::Tail) {
      const auto blocks = json::parse(text).at("blocks");
      height = blocks.size() - 1;
    } else {
      // Syntax damage: find the block the parser stopped in. A well-formed
      // document without a usable block list stays at height 0.
      struct Stop : BlockLocator {
        std::optional<std::size_t> at;
        bool parse_error(std::size_t pos, const std::string&, const nlohmann::detail::exception&) override {
          at = pos;
          return false;
        }
      } finder;
      json::sax_parse(text, &finder);
      if (finder.at) {
        // The reported position is one past the offending byte.
        const std::size_t cut = std::min(text.size(), *finder.at == 0 ? 0 : *finder.at - 1);
        height = locate_height(text.substr(0, cut), text.substr(cut));
      }
    }
    return {false, height, e.what()};
  }

  VerifyResult v = verify_blocks(snap.blocks, &snap.state);
  if (!v.ok) return v;

  const Ledger ledger = Ledger::from_snapshot_json(text);
  const std::string canonical = ledger.snapshot_json();
  if (canonical != text) {
    const auto diff = std::mismatch(canonical.begin(), canonical.end(), text.begin(), text.end());
    const auto at = static_cast<std::size_t>(diff.first - canonical.begin());
    const std::string_view c(canonical);
    return {false, locate_height(c.substr(0, at), c.substr(at)),
            "snapshot text differs from its canonical rendering at byte " + std::to_string(at)};
  }
  return v;
}

Ledger Ledger::from_snapshot_json(std::string_view text) {
  DecodedSnapshot snap = decode_snapshot(text);
  return Ledger(std::move(snap.blocks), std::move(snap.state));
}

Ledger Ledger::load_snapshot(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return from_snapshot_json(ss.str());
}

}  // namespace bcfl
