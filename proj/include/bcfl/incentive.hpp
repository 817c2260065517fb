#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bcfl/ledger.hpp"

namespace bcfl {

struct IncentiveConfig {
  /// Tokens per unit of centroid distance. Fixed for a whole run.
  double c = 100.0;
};

/// Client-side calls into the incentive registry contract hosted on `ledger`.
/// Every call is a transaction; effects are visible after the next seal.
class IncentiveRegistry {
 public:
  explicit IncentiveRegistry(Ledger& ledger) : ledger_(ledger) {}

  /// Coordinator posts the round's selection list (Clist).
  Receipt register_selection(std::uint64_t round_no, std::vector<std::string> clients);

  /// Marks `address`'s work in round `round_no` as finished. Rejected when the
  /// address was not selected or already reported for that round.
  Receipt upd_status(const std::string& address, std::uint64_t round_no, std::uint64_t data_size,
                     double distance);

  /// Credits data_size + distance * C for a finished contribution and returns
  /// the amount. Throws LedgerRejection when there is nothing to pay.
  double cal_incentive(const std::string& address, std::uint64_t round_no);

 private:
  Ledger& ledger_;
};

struct PayoutRecord {
  std::uint64_t round_no = 0;
  std::string address;
  std::uint64_t data_size = 0;
  double distance = 0.0;
  double tokens = 0.0;
};

struct TokenBalance {
  std::string address;
  std::uint64_t rounds_participated = 0;
  std::uint64_t total_data_size = 0;
  double mean_distance = 0.0;
  double balance = 0.0;
};

struct TokenReport {
  /// Every registered non-coordinator address, sorted by address.
  std::vector<TokenBalance> balances;
  /// Payouts in chain order.
  std::vector<PayoutRecord> payouts;

  /// address,rounds_participated,total_data_size,mean_distance,balance
  std::string to_csv() const;
  /// round_no,address,data_size,distance,tokens
  std::string payouts_csv() const;
};

/// Read-only projection of the sealed chain.
TokenReport token_report(const Ledger& ledger);

}  // namespace bcfl
