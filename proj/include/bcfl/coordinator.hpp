#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bcfl/dataset.hpp"
#include "bcfl/metrics.hpp"
#include "bcfl/model.hpp"

namespace bcfl {

class IncentiveRegistry;

enum class AggregationMode { FedAvg, CdwFedAvg, Centralized, Local };

std::string_view to_string(AggregationMode mode);
AggregationMode aggregation_mode_from_string(std::string_view name);

inline bool is_federated(AggregationMode m) {
  return m == AggregationMode::FedAvg || m == AggregationMode::CdwFedAvg;
}

/// What a selected client returns after local training.
struct ClientUpdate {
  std::string client_id;
  ModelParams params;
  /// Training records used (s_t^k).
  std::uint64_t data_size = 0;
  /// Centroid distance of the training records (d_t^k); 0 if a class is missing.
  double distance = 0.0;
};

/// s_k / sum(s).
std::vector<double> fedavg_weights(std::span<const ClientUpdate> updates);
/// (s_k / d_k) / sum(s / d). Throws DegenerateDistanceError if any d_k <= 0.
std::vector<double> cdw_weights(std::span<const ClientUpdate> updates);

/// sum_k weights[k] * params_k, accumulated in update order.
ModelParams weighted_average(std::span<const ClientUpdate> updates, std::span<const double> weights);

ModelParams aggregate_fedavg(std::span<const ClientUpdate> updates);
ModelParams aggregate_cdw(std::span<const ClientUpdate> updates);

/// Deterministic sample of `k` distinct clients for `round_no`, returned in
/// registry order. k equal to the registry size selects everyone.
std::vector<std::string> select_clients(std::span<const ClientDataset> registry, std::size_t k,
                                        std::uint64_t round_no, std::uint64_t seed);

/// Model bytes moved per round, plus running totals.
class CommLedger {
 public:
  struct Entry {
    std::uint64_t round_no = 0;
    std::uint64_t uplink_bytes = 0;
    std::uint64_t downlink_bytes = 0;
  };

  void record(std::uint64_t round_no, std::uint64_t uplink, std::uint64_t downlink);

  const std::vector<Entry>& entries() const noexcept { return entries_; }
  std::uint64_t uplink_total() const noexcept { return uplink_total_; }
  std::uint64_t downlink_total() const noexcept { return downlink_total_; }
  std::uint64_t total() const noexcept { return uplink_total_ + downlink_total_; }

 private:
  std::vector<Entry> entries_;
  std::uint64_t uplink_total_ = 0;
  std::uint64_t downlink_total_ = 0;
};

struct ClientEvaluation {
  std::string client_id;
  ConfusionCounts counts;
  ClassificationMetrics metrics;
};

struct TokenEvent {
  std::string address;
  double tokens = 0.0;
};

struct RoundReport {
  std::uint64_t round_no = 0;
  AggregationMode mode = AggregationMode::FedAvg;
  bool aborted = false;
  std::string abort_reason;
  /// Federated modes: selected clients in registry order, with their
  /// aggregation weight, training size and centroid distance.
  std::vector<std::string> selected;
  std::vector<double> weights;
  std::vector<std::uint64_t> data_sizes;
  std::vector<double> distances;
  /// Test-set evaluation for every client that has test records.
  std::vector<ClientEvaluation> evaluations;
  std::uint64_t uplink_bytes = 0;
  std::uint64_t downlink_bytes = 0;
  std::vector<TokenEvent> token_events;
};

struct RoundPlan {
  std::uint64_t round_no = 1;
  std::vector<std::string> selected_clients;
  /// rng_seed is the run's master seed; each client trains on its own stream
  /// derived from (master seed, client id, round).
  SgdConfig sgd;
};

/// Optional collaborators of a federated round.
struct RoundContext {
  IncentiveRegistry* incentives = nullptr;
  CommLedger* comm = nullptr;
  /// Fault injection: returning true makes that client drop out.
  std::function<bool(std::uint64_t round_no, const std::string& client_id)> client_fails;
  std::size_t workers = 1;
  double threshold = 0.5;
};

struct RoundResult {
  ModelParams global;
  RoundReport report;
};

/// One federated round: broadcast, local SGD on every selected client,
/// aggregation, contribution and payout transactions, evaluation of the new
/// global model. A client failure aborts the round: the global model is kept,
/// no aggregation happens and no tokens are issued.
RoundResult run_round(const RoundPlan& plan, const ModelParams& global,
                      std::span<const ClientDataset> clients, AggregationMode mode,
                      RoundContext& ctx);

struct RunSettings {
  ModelKind kind = ModelKind::LR;
  /// rng_seed is ignored; see RoundPlan.
  SgdConfig sgd;
  std::uint64_t master_seed = 2021;
  std::uint64_t rounds = 100;
  std::size_t clients_per_round = 4;
  std::size_t workers = 1;
  double threshold = 0.5;
};

struct RunHooks {
  IncentiveRegistry* incentives = nullptr;
  std::function<bool(std::uint64_t, const std::string&)> client_fails;
  /// Called before each round's training.
  std::function<void(std::uint64_t round_no)> before_round;
  /// Called after each round with the report and the models it evaluated
  /// (one global model, or one per client in local mode).
  std::function<void(const RoundReport&, std::span<const ModelParams>)> after_round;
};

struct RunResult {
  std::vector<RoundReport> reports;
  /// One model for federated and centralized runs; one per client for local.
  std::vector<ModelParams> final_models;
  CommLedger comm;
};

/// w_0 shared by every mode of a run.
ModelParams initial_model(ModelKind kind, std::uint64_t master_seed);

RunResult run_federated(std::span<const ClientDataset> clients, AggregationMode mode,
                        const RunSettings& settings, RunHooks hooks = {});

/// Trains on the concatenated training sets. Communication is the one-time
/// upload of the serialized training records, charged to round 1.
RunResult run_centralized(std::span<const ClientDataset> clients, const RunSettings& settings,
                          RunHooks hooks = {});

/// Each client trains only on its own data; no communication.
RunResult run_local(std::span<const ClientDataset> clients, const RunSettings& settings,
                    RunHooks hooks = {});

RunResult run_mode(AggregationMode mode, std::span<const ClientDataset> clients,
                   const RunSettings& settings, RunHooks hooks = {});

}  // namespace bcfl
