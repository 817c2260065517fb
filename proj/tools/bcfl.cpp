#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "bcfl/anchoring.hpp"
#include "bcfl/dataset.hpp"
#include "bcfl/errors.hpp"
#include "bcfl/experiment.hpp"
#include "bcfl/ledger.hpp"
#include "bcfl/rng.hpp"

namespace fs = std::filesystem;
using namespace bcfl;

namespace {

enum Exit : int { kOk = 0, kUsage = 1, kDivergence = 2, kMismatch = 3, kMissingAnchor = 4 };

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// Options of `run` that override a loaded config only when given.
struct RunFlags {
  std::string config;
  std::string mode, model;
  std::uint64_t rounds = 0, master_seed = 0, anchor_period = 0, pow_difficulty = 0;
  std::size_t epochs = 0, batch_size = 0, clients_per_round = 0, workers = 0;
  double learning_rate = 0, incentive_c = 0, threshold = 0;
  std::vector<std::string> datasets;
  std::string data_dir;
  std::string out;
  std::vector<std::pair<CLI::Option*, std::function<void(ExperimentConfig&)>>> setters;
};

template <class T>
void add_override(CLI::App* app, RunFlags& f, const std::string& name, T& slot,
                  std::function<void(ExperimentConfig&)> apply, const std::string& help) {
  f.setters.emplace_back(app->add_option(name, slot, help), std::move(apply));
}

void add_run_flags(CLI::App* app, RunFlags& f) {
  app->add_option("--config", f.config, "JSON config; other flags override its fields");
  add_override(app, f, "--mode", f.mode,
               [&f](ExperimentConfig& c) { c.mode = aggregation_mode_from_string(f.mode); },
               "cdw_fedavg | fedavg | centralized | local");
  add_override(app, f, "--model", f.model,
               [&f](ExperimentConfig& c) { c.model = model_kind_from_string(f.model); }, "lr | nn");
  add_override(app, f, "--rounds", f.rounds, [&f](ExperimentConfig& c) { c.rounds = f.rounds; },
               "training rounds");
  add_override(app, f, "--epochs", f.epochs, [&f](ExperimentConfig& c) { c.epochs = f.epochs; },
               "local epochs per round");
  add_override(app, f, "--batch-size", f.batch_size,
               [&f](ExperimentConfig& c) { c.batch_size = f.batch_size; }, "minibatch size");
  add_override(app, f, "--learning-rate", f.learning_rate,
               [&f](ExperimentConfig& c) { c.learning_rate = f.learning_rate; }, "SGD step size");
  add_override(app, f, "-k,--clients-per-round", f.clients_per_round,
               [&f](ExperimentConfig& c) { c.clients_per_round = f.clients_per_round; },
               "clients selected per round");
  add_override(app, f, "--seed", f.master_seed,
               [&f](ExperimentConfig& c) { c.master_seed = f.master_seed; }, "master seed");
  add_override(app, f, "--incentive-c", f.incentive_c,
               [&f](ExperimentConfig& c) { c.incentive_c = f.incentive_c; },
               "token constant C");
  add_override(app, f, "--anchor-period", f.anchor_period,
               [&f](ExperimentConfig& c) { c.anchor_period = f.anchor_period; },
               "records per anchoring period");
  add_override(app, f, "--pow-difficulty", f.pow_difficulty,
               [&f](ExperimentConfig& c) { c.pow_difficulty = f.pow_difficulty; },
               "proof-of-work difficulty, 0 disables");
  add_override(app, f, "--workers", f.workers, [&f](ExperimentConfig& c) { c.workers = f.workers; },
               "client training threads");
  add_override(app, f, "--threshold", f.threshold,
               [&f](ExperimentConfig& c) { c.threshold = f.threshold; }, "decision threshold");
  add_override(app, f, "--dataset", f.datasets,
               [&f](ExperimentConfig& c) {
                 c.generated.clear();
                 c.datasets.clear();
                 for (const auto& spec : f.datasets) {
                   const auto a = spec.find(':');
                   const auto b = a == std::string::npos ? a : spec.find(':', a + 1);
                   if (b == std::string::npos) {
                     throw ContractViolation("config field 'datasets': expected ID:TRAIN.csv:TEST.csv, got '" + spec + "'");
                   }
                   c.datasets.push_back(
                       {spec.substr(0, a), spec.substr(a + 1, b - a - 1), spec.substr(b + 1)});
                 }
               },
               "client data as ID:TRAIN.csv:TEST.csv (repeatable)");
  add_override(app, f, "--data-dir", f.data_dir,
               [&f](ExperimentConfig& c) {
                 c.generated.clear();
                 c.datasets.clear();
                 std::vector<std::string> ids;
                 for (const auto& e : fs::directory_iterator(f.data_dir)) {
                   const std::string name = e.path().filename().string();
                   const std::string suffix = "_train.csv";
                   if (name.size() > suffix.size() &&
                       name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
                     ids.push_back(name.substr(0, name.size() - suffix.size()));
                   }
                 }
                 std::sort(ids.begin(), ids.end());
                 if (ids.empty()) {
                   throw ContractViolation("config field 'datasets': no *_train.csv in " + f.data_dir);
                 }
                 for (const auto& id : ids) {
                   c.datasets.push_back({id, fs::path(f.data_dir) / (id + "_train.csv"),
                                         fs::path(f.data_dir) / (id + "_test.csv")});
                 }
               },
               "directory of <id>_train.csv / <id>_test.csv pairs");
  add_override(app, f, "-o,--out", f.out, [&f](ExperimentConfig& c) { c.output_dir = f.out; },
               "output directory");
}

ExperimentConfig resolve_config(const RunFlags& f) {
  ExperimentConfig cfg = f.config.empty() ? ExperimentConfig{} : load_config(f.config);
  for (const auto& [opt, apply] : f.setters) {
    if (opt->count() > 0) apply(cfg);
  }
  validate(cfg);
  return cfg;
}

int cmd_run(const RunFlags& f) {
  const ExperimentConfig cfg = resolve_config(f);
  const ExperimentOutcome outcome = run_experiment(cfg);
  write_artifacts(cfg, outcome);

  const std::string snapshot = read_file((cfg.output_dir / "chain.json").string());
  const VerifyResult v = verify_snapshot(snapshot);
  if (!v.ok) {
    std::cerr << "written chain failed verification at height " << *v.first_invalid_height << ": "
              << v.reason << "\n";
    return kMismatch;
  }
  const Ledger reread = Ledger::from_snapshot_json(snapshot);
  const auto& last = outcome.run.reports.back();
  std::cout << to_string(cfg.mode) << " " << to_string(cfg.model) << ": " << outcome.run.reports.size()
            << " rounds, comm_total=" << outcome.run.comm.total() << " bytes, chain height "
            << reread.height() << " verified\n";
  for (const auto& e : last.evaluations) {
    std::cout << "  " << e.client_id << " accuracy=" << format_number(e.metrics.accuracy.value)
              << " f1=" << format_number(e.metrics.f1.value) << "\n";
  }
  std::cout << "artifacts in " << cfg.output_dir.string() << "\n";
  return kOk;
}

struct AnchorArgs {
  std::string chain;
  std::string client;
  std::uint64_t period = 0;
  std::string csv;
  std::string coordinator = "central";
  std::uint64_t pow_difficulty = 0;
};

int cmd_anchor(const AnchorArgs& a) {
  const std::vector<Record> records = load_csv(a.csv);
  if (records.empty()) throw ContractViolation("nothing to anchor: " + a.csv + " has no records");

  std::optional<Ledger> ledger;
  if (fs::exists(a.chain)) {
    const std::string text = read_file(a.chain);
    const VerifyResult v = verify_snapshot(text);
    if (!v.ok) {
      std::cerr << "existing chain is invalid at height " << *v.first_invalid_height << ": "
                << v.reason << "\n";
      return kMismatch;
    }
    ledger.emplace(Ledger::from_snapshot_json(text));
  } else {
    ledger.emplace(LedgerConfig{a.coordinator, {}, a.pow_difficulty, 100.0});
  }
  ledger->register_organization(a.client);

  const AnchorPeriod period{a.period, 0, records.size(), a.client};
  anchor_period(*ledger, period, records);
  const Block& b = ledger->seal_block();
  ledger->save_snapshot(a.chain);
  std::cout << "anchored " << a.client << " period " << a.period << " (" << records.size()
            << " records) root " << to_hex(merkle_root(records)) << " in block " << b.height
            << "\n";
  return kOk;
}

int cmd_audit(const AnchorArgs& a) {
  if (!fs::exists(a.chain)) {
    std::cerr << "no chain snapshot at " << a.chain << "\n";
    return kMissingAnchor;
  }
  const std::string text = read_file(a.chain);
  const VerifyResult v = verify_snapshot(text);
  if (!v.ok) {
    std::cerr << "chain invalid at height " << *v.first_invalid_height << ": " << v.reason << "\n";
    return kMismatch;
  }
  const Ledger ledger = Ledger::from_snapshot_json(text);
  const std::vector<Record> records = load_csv(a.csv);
  DisputeOutcome out;
  try {
    out = resolve_dispute(ledger, a.client, a.period, records);
  } catch (const NotFound& e) {
    std::cerr << "no anchor: " << e.what() << "\n";
    return kMissingAnchor;
  }
  const std::string recomputed = records.empty() ? "(no records)" : to_hex(out.recomputed_root);
  if (out.verified) {
    std::cout << "Verified " << a.client << " period " << a.period << " root " << recomputed << "\n";
    return kOk;
  }
  std::cout << "Mismatch " << a.client << " period " << a.period << "\n"
            << "  recomputed " << recomputed << "\n"
            << "  anchored   " << to_hex(out.anchored_root) << "\n";
  return kMismatch;
}

int report_invalid(const VerifyResult& v) {
  std::cout << "INVALID first_invalid_height=" << *v.first_invalid_height << " reason=" << v.reason
            << "\n";
  return kMismatch;
}

int cmd_verify_chain(const std::string& path) {
  const std::string text = read_file(path);
  const VerifyResult v = verify_snapshot(text);
  if (!v.ok) return report_invalid(v);
  const Ledger ledger = Ledger::from_snapshot_json(text);
  std::cout << "OK height=" << ledger.height()
            << " tip=" << to_hex(ledger.blocks().back().block_hash) << "\n";
  return kOk;
}

struct GenArgs {
  std::string out = "data";
  std::uint64_t seed = 2021;
  std::vector<double> separations;
  std::size_t n_train = 1000;
  std::size_t n_test = 1000;
  double positive_fraction = 0.5;
  double covariance_scale = 1.0;
};

int cmd_gen_data(const GenArgs& g) {
  std::vector<ClientDataGenSpec> specs = paper_scenario(g.seed);
  if (!g.separations.empty()) {
    // Extend or shrink the preset to one client per separation.
    std::vector<ClientDataGenSpec> custom;
    for (std::size_t i = 0; i < g.separations.size(); ++i) {
      ClientDataGenSpec s = specs[i % specs.size()];
      s.client_id = "client" + std::to_string(i + 1);
      s.seed = combine_seed(g.seed, i + 1);
      s.centroid_separation = g.separations[i];
      custom.push_back(s);
    }
    specs = std::move(custom);
  }
  fs::create_directories(g.out);
  ExperimentConfig cfg;
  cfg.master_seed = g.seed;
  for (auto& s : specs) {
    s.n_train = g.n_train;
    s.n_test = g.n_test;
    s.positive_fraction = g.positive_fraction;
    s.covariance_scale = g.covariance_scale;
    const ClientDataset d = generate(s);
    save_dataset(d, g.out);
    cfg.datasets.push_back({d.client_id, fs::path(g.out) / (d.client_id + "_train.csv"),
                            fs::path(g.out) / (d.client_id + "_test.csv")});
    std::cout << d.client_id << ": " << d.train.size() << " train, " << d.test.size()
              << " test, separation " << format_number(s.centroid_separation) << "\n";
  }
  std::ofstream(fs::path(g.out) / "config.json") << config_to_json(cfg);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Blockchain-anchored federated learning simulator"};
  app.require_subcommand(1);

  RunFlags run_flags;
  auto* run = app.add_subcommand("run", "Run one experiment and write its artifacts");
  add_run_flags(run, run_flags);

  AnchorArgs anchor_args;
  auto* anchor = app.add_subcommand("anchor", "Anchor the Merkle root of a CSV period on a chain");
  auto* audit = app.add_subcommand("audit", "Check a CSV period against its anchored root");
  for (auto* sub : {anchor, audit}) {
    sub->add_option("--chain", anchor_args.chain, "chain snapshot (JSON)")->required();
    sub->add_option("--client", anchor_args.client, "client address")->required();
    sub->add_option("--period", anchor_args.period, "period id")->required();
    sub->add_option("--csv", anchor_args.csv, "records of the period")->required();
  }
  anchor->add_option("--coordinator", anchor_args.coordinator, "coordinator address for a new chain");
  anchor->add_option("--pow-difficulty", anchor_args.pow_difficulty, "difficulty for a new chain");

  std::vector<std::string> compare_configs;
  std::string compare_out;
  auto* compare = app.add_subcommand("compare", "Run configs differing only in mode; emit one table");
  compare->add_option("configs", compare_configs, "config JSON files")->required()->check(CLI::ExistingFile);
  compare->add_option("-o,--out", compare_out, "CSV output file (default stdout)");

  std::string chain_path;
  auto* verify = app.add_subcommand("verify-chain", "Replay and check a chain snapshot");
  verify->add_option("chain", chain_path, "chain snapshot (JSON)")->required();

  GenArgs gen;
  auto* gen_data = app.add_subcommand("gen-data", "Write synthetic client datasets as CSV");
  gen_data->add_option("-o,--out", gen.out, "output directory");
  gen_data->add_option("--seed", gen.seed, "master seed");
  gen_data->add_option("--separation", gen.separations,
                       "centroid separation per client (one value per client)");
  gen_data->add_option("--n-train", gen.n_train, "training records per client");
  gen_data->add_option("--n-test", gen.n_test, "test records per client");
  gen_data->add_option("--positive-fraction", gen.positive_fraction, "share of failure records");
  gen_data->add_option("--covariance-scale", gen.covariance_scale, "per-class variance");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*run) return cmd_run(run_flags);
    if (*anchor) return cmd_anchor(anchor_args);
    if (*audit) return cmd_audit(anchor_args);
    if (*verify) return cmd_verify_chain(chain_path);
    if (*gen_data) return cmd_gen_data(gen);
    if (*compare) {
      std::vector<ExperimentConfig> cfgs;
      for (const auto& p : compare_configs) cfgs.push_back(load_config(p));
      const std::string table = compare_experiments(cfgs);
      if (compare_out.empty()) {
        std::cout << table;
      } else {
        std::ofstream(compare_out, std::ios::binary) << table;
      }
      return kOk;
    }
  } catch (const DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << "\n";
    return kDivergence;
  } catch (const ContractViolation& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
