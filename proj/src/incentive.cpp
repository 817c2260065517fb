#include "bcfl/incentive.hpp"

#include <map>

#include "bcfl/errors.hpp"
#include "bcfl/record.hpp"

namespace bcfl {

Receipt IncentiveRegistry::register_selection(std::uint64_t round_no,
                                              std::vector<std::string> clients) {
  return ledger_.submit(ledger_.config().coordinator, RegisterSelection{round_no, std::move(clients)});
}

Receipt IncentiveRegistry::upd_status(const std::string& address, std::uint64_t round_no,
                                      std::uint64_t data_size, double distance) {
  return ledger_.submit(address, UpdateStatus{round_no, data_size, distance});
}

double IncentiveRegistry::cal_incentive(const std::string& address, std::uint64_t round_no) {
  const ContractState& state = ledger_.pending_state();
  const auto it = state.contri.find({address, round_no});
  if (it == state.contri.end() || !it->second.finished) {
    throw LedgerRejection("no finished contribution from " + address + " in round " +
                          std::to_string(round_no));
  }
  const double tokens = state.reward(it->second);
  ledger_.submit(address, IncentivePayout{address, round_no, tokens});
  return tokens;
}

TokenReport token_report(const Ledger& ledger) {
  const ContractState& state = ledger.state();
  TokenReport report;
  std::map<std::string, TokenBalance> by_addr;
  std::map<std::string, double> distance_sum;
  for (const auto& org : ledger.config().organizations) {
    if (org != ledger.config().coordinator) by_addr[org].address = org;
  }

  for (const Block& b : ledger.blocks()) {
    for (const Transaction& tx : b.txs) {
      const auto* p = std::get_if<IncentivePayout>(&tx.payload);
      if (!p) continue;
      const Contribution& c = state.contri.at({p->client, p->round_no});
      report.payouts.push_back({p->round_no, p->client, c.data_size, c.distance, p->tokens});
      TokenBalance& tb = by_addr[p->client];
      tb.address = p->client;
      tb.rounds_participated += 1;
      tb.total_data_size += c.data_size;
      distance_sum[p->client] += c.distance;
    }
  }

  for (auto& [addr, tb] : by_addr) {
    if (tb.rounds_participated > 0) {
      tb.mean_distance = distance_sum[addr] / static_cast<double>(tb.rounds_participated);
    }
    const auto it = state.tokens.find(addr);
    tb.balance = it == state.tokens.end() ? 0.0 : it->second;
    report.balances.push_back(tb);
  }
  return report;
}

std::string TokenReport::to_csv() const {
  std::string out = "address,rounds_participated,total_data_size,mean_distance,balance\n";
  for (const auto& b : balances) {
    out += b.address + ',' + std::to_string(b.rounds_participated) + ',' +
           std::to_string(b.total_data_size) + ',' + format_number(b.mean_distance) + ',' +
           format_number(b.balance) + '\n';
  }
  return out;
}

std::string TokenReport::payouts_csv() const {
  std::string out = "round_no,address,data_size,distance,tokens\n";
  for (const auto& p : payouts) {
    out += std::to_string(p.round_no) + ',' + p.address + ',' + std::to_string(p.data_size) + ',' +
           format_number(p.distance) + ',' + format_number(p.tokens) + '\n';
  }
  return out;
}

}  // namespace bcfl
