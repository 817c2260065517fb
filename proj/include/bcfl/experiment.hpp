#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bcfl/coordinator.hpp"
#include "bcfl/dataset.hpp"
#include "bcfl/ledger.hpp"

namespace bcfl {

/// A client whose data is read from CSV files instead of generated.
struct CsvClient {
  std::string client_id;
  std::filesystem::path train_csv;
  std::filesystem::path test_csv;
};

struct ExperimentConfig {
  AggregationMode mode = AggregationMode::CdwFedAvg;
  ModelKind model = ModelKind::LR;
  std::uint64_t rounds = 100;
  std::size_t epochs = 40;
  std::size_t batch_size = 32;
  double learning_rate = 0.005;
  std::size_t clients_per_round = 4;
  std::uint64_t master_seed = 2021;
  double incentive_c = 100.0;
  /// Records per anchoring period; period t is anchored before round t.
  std::uint64_t anchor_period = 10;
  std::uint64_t pow_difficulty = 0;
  std::size_t workers = 1;
  double threshold = 0.5;

  /// Client data: explicit generator specs, CSV files, or (when both are
  /// empty) the four-client preset seeded by master_seed.
  std::vector<ClientDataGenSpec> generated;
  std::vector<CsvClient> datasets;

  std::filesystem::path output_dir = "out";
};

/// Throws ContractViolation naming the offending field.
void validate(const ExperimentConfig& cfg);

std::string config_to_json(const ExperimentConfig& cfg);
/// Missing keys keep their defaults; unknown keys are rejected.
ExperimentConfig config_from_json(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

std::vector<ClientDataset> load_clients(const ExperimentConfig& cfg);

struct ExperimentOutcome {
  std::vector<ClientDataset> clients;
  RunResult run;
  Ledger ledger;
  /// Serialized size of all training records (the centralized upload).
  std::uint64_t dataset_bytes = 0;
};

/// Full pipeline without file output: data, per-round anchoring, training,
/// incentives, one sealed block per round.
ExperimentOutcome run_experiment(const ExperimentConfig& cfg);

/// round,client_id,accuracy,precision,recall,f1,undefined_flags
std::string rounds_csv(const RunResult& run);
/// round,uplink_bytes,downlink_bytes,cumulative_bytes
std::string comm_csv(const CommLedger& comm);
std::string summary_json(const ExperimentConfig& cfg, const ExperimentOutcome& outcome);

/// Overhead table laid out like the communication comparison: one row for
/// centralized training and one per clients-per-round value 1..max_k, one
/// column per dataset size in bytes.
std::string overhead_table_csv(ModelKind kind, std::uint64_t rounds, std::size_t max_k,
                               std::span<const std::uint64_t> dataset_sizes);

/// Writes config.json, rounds.csv, comm.csv, comm_table.csv, summary.json,
/// chain.json, tokens.csv and payouts.csv into cfg.output_dir.
void write_artifacts(const ExperimentConfig& cfg, const ExperimentOutcome& outcome);

/// Runs configs that differ only in mode (and output_dir) and returns
/// mode,round,client_id,accuracy,precision,recall,f1,undefined_flags rows.
std::string compare_experiments(std::span<const ExperimentConfig> configs);

}  // namespace bcfl
