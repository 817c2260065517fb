#include "bcfl/experiment.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "bcfl/anchoring.hpp"
#include "bcfl/errors.hpp"
#include "bcfl/incentive.hpp"

namespace bcfl {

using json = nlohmann::json;

void validate(const ExperimentConfig& cfg) {
  auto bad = [](const char* field, const std::string& why) {
    throw ContractViolation(std::string("config field '") + field + "': " + why);
  };
  if (cfg.rounds == 0) bad("rounds", "must be at least 1");
  if (cfg.epochs == 0) bad("epochs", "must be at least 1");
  if (cfg.batch_size == 0) bad("batch_size", "must be at least 1");
  if (!(cfg.learning_rate > 0.0) || !std::isfinite(cfg.learning_rate)) {
    bad("learning_rate", "must be finite and positive");
  }
  if (cfg.clients_per_round == 0) bad("clients_per_round", "must be at least 1");
  if (!(cfg.incentive_c >= 0.0) || !std::isfinite(cfg.incentive_c)) {
    bad("incentive_c", "must be finite and non-negative");
  }
  if (cfg.anchor_period == 0) bad("anchor_period", "must be at least 1");
  if (cfg.workers == 0) bad("workers", "must be at least 1");
  if (!(cfg.threshold > 0.0 && cfg.threshold < 1.0)) bad("threshold", "must lie in (0, 1)");
  if (!cfg.generated.empty() && !cfg.datasets.empty()) {
    bad("clients", "give either generated clients or datasets, not both");
  }
  const std::size_t n_clients = !cfg.generated.empty()  ? cfg.generated.size()
                                : !cfg.datasets.empty() ? cfg.datasets.size()
                                                        : 4;
  if (is_federated(cfg.mode) && cfg.clients_per_round > n_clients) {
    bad("clients_per_round", "exceeds the number of clients (" + std::to_string(n_clients) + ")");
  }
  if (cfg.output_dir.empty()) bad("output_dir", "must not be empty");
}

// --- config json ----------------------------------------------------------------

namespace {

json spec_to_json(const ClientDataGenSpec& s) {
  return {{"client_id", s.client_id},
          {"n_train", s.n_train},
          {"n_test", s.n_test},
          {"positive_fraction", s.positive_fraction},
          {"centroid_separation", s.centroid_separation},
          {"covariance_scale", s.covariance_scale},
          {"seed", s.seed},
          {"direction_seed", s.direction_seed}};
}

template <class T>
void read_field(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ContractViolation(std::string("config field '") + key + "' has the wrong type");
  }
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const char* where) {
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ContractViolation(std::string("unknown ") + where + " field '" + key + "'");
  }
}

ClientDataGenSpec spec_from_json(const json& j) {
  reject_unknown(j,
                 {"client_id", "n_train", "n_test", "positive_fraction", "centroid_separation",
                  "covariance_scale", "seed", "direction_seed"},
                 "client");
  ClientDataGenSpec s;
  read_field(j, "client_id", s.client_id);
  read_field(j, "n_train", s.n_train);
  read_field(j, "n_test", s.n_test);
  read_field(j, "positive_fraction", s.positive_fraction);
  read_field(j, "centroid_separation", s.centroid_separation);
  read_field(j, "covariance_scale", s.covariance_scale);
  read_field(j, "seed", s.seed);
  read_field(j, "direction_seed", s.direction_seed);
  return s;
}

json config_json(const ExperimentConfig& cfg) {
  json generated = json::array();
  for (const auto& s : cfg.generated) generated.push_back(spec_to_json(s));
  json datasets = json::array();
  for (const auto& d : cfg.datasets) {
    datasets.push_back({{"client_id", d.client_id},
                        {"train_csv", d.train_csv.string()},
                        {"test_csv", d.test_csv.string()}});
  }
  return {{"mode", to_string(cfg.mode)},
          {"model", to_string(cfg.model)},
          {"rounds", cfg.rounds},
          {"epochs", cfg.epochs},
          {"batch_size", cfg.batch_size},
          {"learning_rate", cfg.learning_rate},
          {"clients_per_round", cfg.clients_per_round},
          {"master_seed", cfg.master_seed},
          {"incentive_c", cfg.incentive_c},
          {"anchor_period", cfg.anchor_period},
          {"pow_difficulty", cfg.pow_difficulty},
          {"workers", cfg.workers},
          {"threshold", cfg.threshold},
          {"clients", generated},
          {"datasets", datasets},
          {"output_dir", cfg.output_dir.string()}};
}

}  // namespace

std::string config_to_json(const ExperimentConfig& cfg) { return config_json(cfg).dump(2) + "\n"; }

ExperimentConfig config_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ContractViolation(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ContractViolation("config must be a JSON object");
  reject_unknown(j,
                 {"mode", "model", "rounds", "epochs", "batch_size", "learning_rate",
                  "clients_per_round", "master_seed", "incentive_c", "anchor_period",
                  "pow_difficulty", "workers", "threshold", "clients", "datasets", "output_dir"},
                 "config");
  ExperimentConfig cfg;
  std::string s;
  if (j.contains("mode")) {
    read_field(j, "mode", s);
    cfg.mode = aggregation_mode_from_string(s);
  }
  if (j.contains("model")) {
    read_field(j, "model", s);
    cfg.model = model_kind_from_string(s);
  }
  read_field(j, "rounds", cfg.rounds);
  read_field(j, "epochs", cfg.epochs);
  read_field(j, "batch_size", cfg.batch_size);
  read_field(j, "learning_rate", cfg.learning_rate);
  read_field(j, "clients_per_round", cfg.clients_per_round);
  read_field(j, "master_seed", cfg.master_seed);
  read_field(j, "incentive_c", cfg.incentive_c);
  read_field(j, "anchor_period", cfg.anchor_period);
  read_field(j, "pow_difficulty", cfg.pow_difficulty);
  read_field(j, "workers", cfg.workers);
  read_field(j, "threshold", cfg.threshold);
  if (j.contains("clients")) {
    for (const auto& c : j.at("clients")) cfg.generated.push_back(spec_from_json(c));
  }
  if (j.contains("datasets")) {
    for (const auto& d : j.at("datasets")) {
      reject_unknown(d, {"client_id", "train_csv", "test_csv"}, "dataset");
      CsvClient c;
      c.client_id = d.at("client_id").get<std::string>();
      c.train_csv = d.at("train_csv").get<std::string>();
      c.test_csv = d.at("test_csv").get<std::string>();
      cfg.datasets.push_back(std::move(c));
    }
  }
  if (j.contains("output_dir")) {
    read_field(j, "output_dir", s);
    cfg.output_dir = s;
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ContractViolation("cannot open config " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return config_from_json(ss.str());
}

std::vector<ClientDataset> load_clients(const ExperimentConfig& cfg) {
  std::vector<ClientDataset> out;
  if (!cfg.datasets.empty()) {
    for (const auto& d : cfg.datasets) out.push_back(load_dataset(d.client_id, d.train_csv, d.test_csv));
    return out;
  }
  const std::vector<ClientDataGenSpec> specs =
      cfg.generated.empty() ? paper_scenario(cfg.master_seed) : cfg.generated;
  for (const auto& s : specs) out.push_back(generate(s));
  return out;
}

// --- pipeline ---------------------------------------------------------------------

ExperimentOutcome run_experiment(const ExperimentConfig& cfg) {
  validate(cfg);
  std::vector<ClientDataset> clients = load_clients(cfg);

  LedgerConfig lc;
  lc.coordinator = "central";
  for (const auto& c : clients) lc.organizations.push_back(c.client_id);
  lc.pow_difficulty = cfg.pow_difficulty;
  lc.incentive_c = cfg.incentive_c;
  Ledger ledger(std::move(lc));
  IncentiveRegistry incentives(ledger);

  std::vector<std::vector<AnchorPeriod>> periods;
  for (const auto& c : clients) periods.push_back(schedule_periods(c.client_id, c.train.size(), cfg.anchor_period));

  RunSettings settings;
  settings.kind = cfg.model;
  settings.sgd.batch_size = cfg.batch_size;
  settings.sgd.epochs = cfg.epochs;
  settings.sgd.learning_rate = cfg.learning_rate;
  settings.master_seed = cfg.master_seed;
  settings.rounds = cfg.rounds;
  settings.clients_per_round = cfg.clients_per_round;
  settings.workers = cfg.workers;
  settings.threshold = cfg.threshold;

  RunHooks hooks;
  if (is_federated(cfg.mode)) hooks.incentives = &incentives;
  hooks.before_round = [&](std::uint64_t t) {
    for (std::size_t i = 0; i < clients.size(); ++i) {
      if (t > periods[i].size()) continue;
      const AnchorPeriod& p = periods[i][t - 1];
      anchor_period(ledger, p,
                    std::span<const Record>(clients[i].train).subspan(p.start, p.record_count()));
    }
  };
  hooks.after_round = [&](const RoundReport&, std::span<const ModelParams>) { ledger.seal_block(); };

  RunResult run = run_mode(cfg.mode, clients, settings, std::move(hooks));

  std::uint64_t dataset_bytes = 0;
  for (const auto& c : clients) dataset_bytes += serialize_records(c.train).size();
  return ExperimentOutcome{std::move(clients), std::move(run), std::move(ledger), dataset_bytes};
}

// --- reports ------------------------------------------------------------------------

std::string rounds_csv(const RunResult& run) {
  std::string out = "round,client_id,accuracy,precision,recall,f1,undefined_flags\n";
  for (const auto& r : run.reports) {
    for (const auto& e : r.evaluations) {
      out += std::to_string(r.round_no) + ',' + e.client_id + ',' +
             format_number(e.metrics.accuracy.value) + ',' + format_number(e.metrics.precision.value) +
             ',' + format_number(e.metrics.recall.value) + ',' + format_number(e.metrics.f1.value) +
             ',' + e.metrics.undefined_flags() + '\n';
    }
  }
  return out;
}

std::string comm_csv(const CommLedger& comm) {
  std::string out = "round,uplink_bytes,downlink_bytes,cumulative_bytes\n";
  std::uint64_t cumulative = 0;
  for (const auto& e : comm.entries()) {
    cumulative += e.uplink_bytes + e.downlink_bytes;
    out += std::to_string(e.round_no) + ',' + std::to_string(e.uplink_bytes) + ',' +
           std::to_string(e.downlink_bytes) + ',' + std::to_string(cumulative) + '\n';
  }
  return out;
}

namespace {

json metrics_json(const ClientEvaluation& e) {
  return {{"client_id", e.client_id},
          {"tp", e.counts.tp},
          {"tn", e.counts.tn},
          {"fp", e.counts.fp},
          {"fn", e.counts.fn},
          {"accuracy", e.metrics.accuracy.value},
          {"precision", e.metrics.precision.value},
          {"recall", e.metrics.recall.value},
          {"f1", e.metrics.f1.value},
          {"undefined_flags", e.metrics.undefined_flags()}};
}

}  // namespace

std::string summary_json(const ExperimentConfig& cfg, const ExperimentOutcome& outcome) {
  const RunResult& run = outcome.run;
  json rounds = json::array();
  for (const auto& r : run.reports) {
    json tokens = json::array();
    for (const auto& t : r.token_events) tokens.push_back({{"address", t.address}, {"tokens", t.tokens}});
    rounds.push_back({{"round", r.round_no},
                      {"aborted", r.aborted},
                      {"abort_reason", r.abort_reason},
                      {"selected", r.selected},
                      {"weights", r.weights},
                      {"data_sizes", r.data_sizes},
                      {"distances", r.distances},
                      {"uplink_bytes", r.uplink_bytes},
                      {"downlink_bytes", r.downlink_bytes},
                      {"token_events", tokens}});
  }
  json final_metrics = json::array();
  if (!run.reports.empty()) {
    for (const auto& e : run.reports.back().evaluations) final_metrics.push_back(metrics_json(e));
  }
  json balances = json::object();
  for (const auto& [addr, bal] : outcome.ledger.state().tokens) balances[addr] = bal;
  const VerifyResult v = outcome.ledger.verify_chain();

  json j = {{"mode", to_string(cfg.mode)},
            {"model", to_string(cfg.model)},
            {"rounds", cfg.rounds},
            {"clients_per_round", cfg.clients_per_round},
            {"master_seed", cfg.master_seed},
            {"model_bytes", serialized_size(cfg.model)},
            {"dataset_bytes", outcome.dataset_bytes},
            {"comm",
             {{"uplink_total", run.comm.uplink_total()},
              {"downlink_total", run.comm.downlink_total()},
              {"comm_total", run.comm.total()}}},
            {"final_metrics", final_metrics},
            {"token_balances", balances},
            {"chain",
             {{"height", outcome.ledger.height()},
              {"tip_hash", to_hex(outcome.ledger.blocks().back().block_hash)},
              {"verified", v.ok}}},
            {"per_round", rounds}};
  return j.dump(2) + "\n";
}

std::string overhead_table_csv(ModelKind kind, std::uint64_t rounds, std::size_t max_k,
                               std::span<const std::uint64_t> dataset_sizes) {
  const std::string suffix = kind == ModelKind::LR ? "_LR" : "_NN";
  std::string out = "data_size";
  for (auto s : dataset_sizes) out += ',' + std::to_string(s);
  out += "\nCentralized" + suffix;
  for (auto s : dataset_sizes) out += ',' + std::to_string(s);
  out += '\n';
  for (std::size_t k = 1; k <= max_k; ++k) {
    out += "Fed" + suffix + '(' + std::to_string(k) + ')';
    const std::uint64_t bytes = serialized_size(kind) * k * rounds * 2;
    for (std::size_t i = 0; i < dataset_sizes.size(); ++i) out += ',' + std::to_string(bytes);
    out += '\n';
  }
  return out;
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f << content;
  if (!f) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace

void write_artifacts(const ExperimentConfig& cfg, const ExperimentOutcome& outcome) {
  const auto& dir = cfg.output_dir;
  std::filesystem::create_directories(dir);
  write_file(dir / "config.json", config_to_json(cfg));
  write_file(dir / "rounds.csv", rounds_csv(outcome.run));
  write_file(dir / "comm.csv", comm_csv(outcome.run.comm));
  const std::uint64_t sizes[] = {1000, 1000000, 1000000000, outcome.dataset_bytes};
  write_file(dir / "comm_table.csv",
             overhead_table_csv(cfg.model, cfg.rounds, outcome.clients.size(), sizes));
  write_file(dir / "summary.json", summary_json(cfg, outcome));
  outcome.ledger.save_snapshot(dir / "chain.json");
  const TokenReport tokens = token_report(outcome.ledger);
  write_file(dir / "tokens.csv", tokens.to_csv());
  write_file(dir / "payouts.csv", tokens.payouts_csv());
}

std::string compare_experiments(std::span<const ExperimentConfig> configs) {
  if (configs.size() < 2) throw ContractViolation("compare needs at least two configs");
  auto comparable = [](const ExperimentConfig& c) {
    json j = config_json(c);
    j.erase("mode");
    j.erase("output_dir");
    j.erase("workers");
    return j;
  };
  const json reference = comparable(configs.front());
  std::set<AggregationMode> modes;
  for (const auto& c : configs) {
    if (comparable(c) != reference) {
      throw ContractViolation("configs differ in more than mode; results would not be comparable");
    }
    if (!modes.insert(c.mode).second) {
      throw ContractViolation("mode " + std::string(to_string(c.mode)) + " listed twice");
    }
  }

  std::string out = "mode,round,client_id,accuracy,precision,recall,f1,undefined_flags\n";
  for (const auto& c : configs) {
    const ExperimentOutcome o = run_experiment(c);
    const std::string mode(to_string(c.mode));
    for (const auto& r : o.run.reports) {
      for (const auto& e : r.evaluations) {
        out += mode + ',' + std::to_string(r.round_no) + ',' + e.client_id + ',' +
               format_number(e.metrics.accuracy.value) + ',' +
               format_number(e.metrics.precision.value) + ',' +
               format_number(e.metrics.recall.value) + ',' + format_number(e.metrics.f1.value) +
               ',' + e.metrics.undefined_flags() + '\n';
      }
    }
  }
  return out;
}

}  // namespace bcfl
