#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <shared_mutex>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "bcfl/hash.hpp"

namespace bcfl {

// Transaction payloads. Field order here is the canonical encoding order.

/// Root registry write: Merkle root of one anchoring period.
struct AnchorRoot {
  std::uint64_t period_id = 0;
  std::uint64_t period_time = 0;
  Digest root{};
  bool operator==(const AnchorRoot&) const = default;
};

/// The coordinator's selection list (Clist) for one training round.
struct RegisterSelection {
  std::uint64_t round_no = 0;
  std::vector<std::string> clients;
  bool operator==(const RegisterSelection&) const = default;
};

/// A selected client reports its finished training work.
struct UpdateStatus {
  std::uint64_t round_no = 0;
  std::uint64_t data_size = 0;
  double distance = 0.0;
  bool operator==(const UpdateStatus&) const = default;
};

/// Tokens credited to `client` for round `round_no`.
struct IncentivePayout {
  std::string client;
  std::uint64_t round_no = 0;
  double tokens = 0.0;
  bool operator==(const IncentivePayout&) const = default;
};

/// First transaction of the genesis block: fixes the chain's parameters.
struct ChainParams {
  std::string coordinator;
  std::uint64_t pow_difficulty = 0;
  double incentive_c = 100.0;
  bool operator==(const ChainParams&) const = default;
};

/// The coordinator admits an organization; only registered addresses may send.
struct RegisterOrganization {
  std::string address;
  bool operator==(const RegisterOrganization&) const = default;
};

using Payload = std::variant<AnchorRoot, RegisterSelection, UpdateStatus, IncentivePayout,
                             ChainParams, RegisterOrganization>;

std::string_view payload_type(const Payload& payload);

struct Transaction {
  Digest tx_id{};
  std::string sender;
  std::uint64_t timestamp = 0;
  Payload payload;

  /// Builds a transaction with its id filled in.
  static Transaction make(std::string sender, std::uint64_t timestamp, Payload payload);

  /// Length-prefixed fields, big-endian integers, floats as IEEE-754 bits.
  /// Covers everything except tx_id.
  std::vector<std::uint8_t> canonical_encoding() const;
  Digest compute_id() const;

  bool operator==(const Transaction&) const = default;
};

struct Block {
  std::uint64_t height = 0;
  Digest prev_hash{};
  std::vector<Transaction> txs;
  std::uint64_t nonce = 0;
  Digest block_hash{};

  /// SHA-256(height || prev_hash || canonical tx list || nonce).
  Digest compute_hash() const;

  bool operator==(const Block&) const = default;
};

/// Position a transaction will occupy once its block is sealed.
struct Receipt {
  std::uint64_t height = 0;
  std::uint32_t index = 0;
  bool operator==(const Receipt&) const = default;
};

/// PoW target floor(2^256 / difficulty) as 32 big-endian bytes. Difficulty 1
/// accepts every hash and is reported as nullopt, like difficulty 0 (disabled).
std::optional<Digest> pow_target(std::uint64_t difficulty);

/// True when `hash`, read as a big-endian integer, is below the target.
bool meets_target(const Digest& hash, const std::optional<Digest>& target);

struct RootEntry {
  Digest root{};
  std::uint64_t period_time = 0;
  bool operator==(const RootEntry&) const = default;
};

struct Contribution {
  bool finished = false;
  std::uint64_t data_size = 0;
  double distance = 0.0;
  bool paid = false;
  bool operator==(const Contribution&) const = default;
};

using AddressRound = std::pair<std::string, std::uint64_t>;

/// Root registry and incentive registry contract storage. Always the fold of
/// the chain's transactions in order.
struct ContractState {
  /// Empty until the genesis ChainParams transaction is applied.
  std::string coordinator;
  double incentive_c = 100.0;
  std::uint64_t pow_difficulty = 0;
  /// Registration order; the coordinator comes first.
  std::vector<std::string> organizations;

  std::map<AddressRound, RootEntry> roots;  // (client, period_id)
  std::map<std::uint64_t, std::vector<std::string>> selections;
  std::map<AddressRound, Contribution> contri;  // (client, round_no)
  std::map<std::string, double> tokens;

  /// Applies one transaction or throws LedgerRejection, leaving the state
  /// untouched on rejection.
  void apply(const Transaction& tx);

  bool is_registered(const std::string& address) const;

  /// Reward for a finished contribution: data_size + distance * C.
  double reward(const Contribution& c) const {
    return static_cast<double>(c.data_size) + c.distance * incentive_c;
  }

  bool operator==(const ContractState&) const = default;
};

struct LedgerConfig {
  /// Address of the central organization; the only sender allowed to post
  /// selection lists.
  std::string coordinator = "central";
  std::vector<std::string> organizations;
  /// 0 disables proof of work.
  std::uint64_t pow_difficulty = 0;
  double incentive_c = 100.0;

  bool operator==(const LedgerConfig&) const = default;
};

struct VerifyResult {
  bool ok = true;
  std::optional<std::uint64_t> first_invalid_height;
  std::string reason;
};

/// Recomputes every hash, link, PoW proof and the contract state by replay.
/// `cached` (when given) must equal the replayed state; a difference is
/// reported at the tip.
VerifyResult verify_blocks(std::span<const Block> blocks, const ContractState* cached);

/// Replays `blocks` from an empty state. Throws LedgerRejection on an invalid
/// transaction.
ContractState replay(std::span<const Block> blocks);

/// Checks a snapshot file's text. Besides verify_blocks, the text must be the
/// exact rendering of what it decodes to. Damage is attributed to the block
/// it falls in; damage to the cached state or the closing bytes is reported at
/// the tip, damage ahead of the first block at height 0.
VerifyResult verify_snapshot(std::string_view text);

/// Simulated consortium chain: one deterministic sealer, one full replica per
/// registered organization. Submissions are validated against the pending
/// state and included FIFO in the next sealed block.
class Ledger {
 public:
  /// Mines a genesis block holding the ChainParams transaction and one
  /// registration per listed organization.
  explicit Ledger(LedgerConfig config);

  Ledger(Ledger&&) noexcept = default;
  Ledger& operator=(Ledger&&) noexcept = default;

  /// Submits a registration from the coordinator; the address may send at
  /// once and gets its replica immediately. No-op if already registered.
  void register_organization(const std::string& address);
  bool is_registered(const std::string& address) const;

  /// Stamps the next logical timestamp.
  Transaction make_transaction(std::string sender, Payload payload);

  Receipt submit(const Transaction& tx);
  Receipt submit(std::string sender, Payload payload) {
    return submit(make_transaction(std::move(sender), std::move(payload)));
  }

  const Block& seal_block();

  VerifyResult verify_chain() const;

  /// Height of the last sealed block (genesis is 0).
  std::uint64_t height() const;
  std::size_t pending_count() const;

  RootEntry query_root(const std::string& address, std::uint64_t period_id) const;
  /// Zero for a registered address that has never been paid.
  double query_tokens(const std::string& address) const;
  Contribution query_contri(const std::string& address, std::uint64_t round_no) const;

  /// State after the last sealed block.
  const ContractState& state() const noexcept { return state_; }
  /// State including pending transactions.
  const ContractState& pending_state() const noexcept { return pending_state_; }
  const std::vector<Block>& blocks() const noexcept { return blocks_; }
  const LedgerConfig& config() const noexcept { return config_; }

  const std::vector<Block>& replica(const std::string& organization) const;
  bool replicas_consistent() const;

  /// Chain snapshot: blocks with hex hashes and decoded payloads, and the
  /// cached contract state. Parameters and organizations live on-chain.
  std::string snapshot_json() const;
  void save_snapshot(const std::filesystem::path& path) const;

  /// Loads without validating; call verify_chain() before trusting it.
  static Ledger from_snapshot_json(std::string_view text);
  static Ledger load_snapshot(const std::filesystem::path& path);

 private:
  Ledger(std::vector<Block> blocks, ContractState state);
  Block mine(Block block) const;

  LedgerConfig config_;
  std::optional<Digest> target_;
  std::vector<Block> blocks_;
  std::map<std::string, std::vector<Block>> replicas_;
  std::vector<Transaction> pending_;
  ContractState state_;
  ContractState pending_state_;
  std::set<Digest> tx_ids_;
  std::uint64_t clock_ = 0;
  std::unique_ptr<std::shared_mutex> mu_;
};

}  // namespace bcfl
