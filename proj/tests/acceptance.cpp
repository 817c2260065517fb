// One PASS/FAIL line per acceptance criterion. Exit status is the number of
// failed criteria.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include "bcfl/anchoring.hpp"
#include "bcfl/coordinator.hpp"
#include "bcfl/dataset.hpp"
#include "bcfl/experiment.hpp"
#include "bcfl/incentive.hpp"
#include "bcfl/metrics.hpp"
#include "support.hpp"

using namespace bcfl;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

ExperimentConfig preset(AggregationMode mode, std::size_t k = 4) {
  ExperimentConfig c;
  c.mode = mode;
  c.clients_per_round = k;
  c.output_dir = "unused";
  return c;
}

// Preset clients with the separations overridden.
std::vector<ClientDataGenSpec> scenario(std::vector<double> separations) {
  auto specs = paper_scenario();
  for (std::size_t i = 0; i < specs.size(); ++i) specs[i].centroid_separation = separations[i];
  return specs;
}

Outcome comm_exactness() {
  const std::uint64_t table[] = {28800, 57600, 86400, 115200};
  std::ostringstream d;
  bool ok = true;
  for (std::size_t k = 1; k <= 4; ++k) {
    const auto o = run_experiment(preset(AggregationMode::FedAvg, k));
    const auto total = o.run.comm.total();
    d << "K=" << k << ":" << total << " ";
    ok = ok && total == table[k - 1];
  }
  const auto o = run_experiment(preset(AggregationMode::Centralized));
  std::uint64_t raw = 0;
  for (const auto& c : o.clients) raw += serialize_records(c.train).size();
  d << "centralized:" << o.run.comm.total() << " dataset:" << raw;
  ok = ok && o.run.comm.total() == raw && raw == 4 * 1000 * 145;
  return {ok, d.str()};
}

Outcome cdw_reduction() {
  Rng rng(2);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto kind = trial % 10 == 0 ? ModelKind::NN : ModelKind::LR;
    const std::size_t n = 1 + rng.index(8);
    const double d = rng.uniform(0.01, 10.0);
    std::vector<ClientUpdate> ups;
    for (std::size_t i = 0; i < n; ++i) {
      ups.push_back({"c" + std::to_string(i), testutil::random_params(rng, kind, 3.0), 1 + rng.index(5000), d});
    }
    const auto a = aggregate_cdw(ups), b = aggregate_fedavg(ups);
    for (std::size_t j = 0; j < a.size(); ++j) worst = std::max(worst, std::fabs(a.values()[j] - b.values()[j]));
  }
  std::vector<ClientUpdate> ex{{"a", ModelParams(ModelKind::LR, std::vector<double>(18, 1.0)), 100, 2.0},
                               {"b", ModelParams(ModelKind::LR, std::vector<double>(18, 2.0)), 300, 1.0}};
  double ex_err = 0.0;
  const auto ex_agg = aggregate_cdw(ex);
  for (double v : ex_agg.values()) ex_err = std::max(ex_err, std::fabs(v - 13.0 / 7.0));
  std::ostringstream d;
  d << "max diff " << worst << ", worked example error " << ex_err;
  return {worst <= 1e-12 && ex_err <= 1e-12, d.str()};
}

Outcome gradient_oracle() {
  Rng rng(3);
  std::ostringstream d;
  bool ok = true;
  for (auto kind : {ModelKind::LR, ModelKind::NN}) {
    double worst = 0.0;
    std::size_t checked = 0, skipped = 0;
    for (int pair = 0; pair < 100; ++pair) {
      const auto params = testutil::random_params(rng, kind, kind == ModelKind::LR ? 1.0 : 0.2);
      const auto batch = testutil::random_records(rng, 1 + rng.index(8));
      const auto comps = testutil::sample_components(rng, kind, 4);
      const auto g = testutil::check_gradient(params, batch, comps);
      worst = std::max(worst, g.max_rel_error);
      checked += g.checked;
      skipped += g.skipped_kinks;
    }
    d << to_string(kind) << ": max rel " << worst << " over " << checked << " components (" << skipped
      << " at kinks) ";
    ok = ok && worst <= 1e-4 && checked > 0;
  }
  return {ok, d.str()};
}

// Leaf preimages written out by hand rather than through canonicalize.
Digest hand_leaf(int k) {
  std::string s;
  for (int j = 0; j < 18; ++j) {
    const double v = (j - 9) * 0.5 + k;
    char buf[32];
    std::snprintf(buf, sizeof buf, v == static_cast<int>(v) ? "%.0f" : "%.1f", v);
    s += buf;
    s += ',';
  }
  return sha256(s + (k % 2 ? "1" : "0"));
}

Record vector_record(int k) {
  Record r;
  for (std::size_t j = 0; j < 18; ++j) r.features[j] = (static_cast<double>(j) - 9) * 0.5 + k;
  r.label = k % 2;
  return r;
}

Outcome merkle_tamper() {
  Rng rng(4);
  Ledger ledger(LedgerConfig{"central", {"client1"}, 0, 100.0});
  std::size_t verified = 0, mismatched = 0;
  for (std::uint64_t trial = 1; trial <= 500; ++trial) {
    const std::size_t n = 1 + rng.index(64);
    const auto recs = testutil::random_records(rng, n, 5.0);
    anchor_period(ledger, {trial, 0, n, "client1"}, recs);
    ledger.seal_block();
    verified += resolve_dispute(ledger, "client1", trial, recs).verified;

    auto bad = recs;
    switch (rng.index(4)) {
      case 0: {
        double& f = bad[rng.index(n)].features[rng.index(18)];
        f = std::nextafter(f, f + 1.0);
        break;
      }
      case 1: bad[rng.index(n)].label ^= 1; break;
      case 2: bad.erase(bad.begin() + static_cast<long>(rng.index(n))); break;
      default: bad.push_back(testutil::random_records(rng, 1, 5.0)[0]);
    }
    mismatched += !resolve_dispute(ledger, "client1", trial, bad).verified;
  }
  const Digest l0 = hand_leaf(0), l1 = hand_leaf(1), l2 = hand_leaf(2);
  const std::vector recs{vector_record(0), vector_record(1), vector_record(2)};
  const bool shapes = merkle_root(std::span(recs).first(1)) == l0 &&
                      merkle_root(std::span(recs).first(2)) == sha256_pair(l0, l1) &&
                      merkle_root(recs) == sha256_pair(sha256_pair(l0, l1), sha256_pair(l2, l2));
  std::ostringstream d;
  d << verified << "/500 untouched verified, " << mismatched << "/500 mutated mismatched, 1/2/3-leaf roots "
    << (shapes ? "match" : "differ");
  return {verified == 500 && mismatched == 500 && shapes, d.str()};
}

// Expected first invalid height after damaging byte p of a snapshot: blocks
// whose closing line ends before p are intact, later damage is clamped to the tip.
std::uint64_t expected_height(const std::string& text, std::size_t p, std::uint64_t tip) {
  std::uint64_t closed = 0;
  for (std::size_t at = text.find("\n  }"); at != std::string::npos && at + 3 < p; at = text.find("\n  }", at + 1)) {
    ++closed;
  }
  return std::min(closed, tip);
}

Outcome ledger_replay() {
  auto cfg = preset(AggregationMode::CdwFedAvg, 2);
  cfg.rounds = 4;
  cfg.epochs = 2;
  cfg.anchor_period = 250;
  const auto o = run_experiment(cfg);
  const ContractState replayed = replay(o.ledger.blocks());
  const bool same = replayed.tokens == o.ledger.state().tokens && replayed.roots == o.ledger.state().roots &&
                    replayed == o.ledger.state();

  const std::string text = o.ledger.snapshot_json();
  const std::uint64_t tip = o.ledger.height();
  Rng rng(5);
  std::size_t flips = 0, wrong = 0;
  for (std::size_t p = 0; p < text.size(); ++p) {
    std::string bad = text;
    bad[p] = static_cast<char>(bad[p] ^ static_cast<char>(1 + rng.index(255)));
    const VerifyResult v = verify_snapshot(bad);
    ++flips;
    if (v.ok || !v.first_invalid_height || *v.first_invalid_height != expected_height(text, p, tip)) ++wrong;
  }
  std::ostringstream d;
  d << "replay " << (same ? "matches" : "differs") << ", " << flips << " single-byte flips over "
    << tip + 1 << " blocks, " << wrong << " misattributed";
  return {same && verify_snapshot(text).ok && wrong == 0, d.str()};
}

Outcome incentive_conservation() {
  const auto cfg = preset(AggregationMode::CdwFedAvg);
  const auto o = run_experiment(cfg);
  std::map<std::string, double> expected;
  for (std::uint64_t round = 1; round <= cfg.rounds; ++round) {
    for (const auto& c : o.clients) {
      expected[c.client_id] += static_cast<double>(c.train.size()) + centroid_distance(c.train) * cfg.incentive_c;
    }
  }
  bool exact = true;
  std::string argmax;
  double top = -1.0;
  for (const auto& c : o.clients) {
    const double bal = o.ledger.query_tokens(c.client_id);
    exact = exact && bal == expected[c.client_id];
    if (bal > top) {
      top = bal;
      argmax = c.client_id;
    }
  }
  std::ostringstream d;
  d << "balances " << (exact ? "exact" : "differ") << ", argmax " << argmax << " with " << top;
  return {exact && argmax == "client3", d.str()};
}

// Smallest accuracy over clients in each round.
std::vector<double> worst_accuracy(const RunResult& run) {
  std::vector<double> out;
  for (const auto& r : run.reports) {
    double m = 1.0;
    for (const auto& e : r.evaluations) m = std::min(m, e.metrics.accuracy.value);
    out.push_back(m);
  }
  return out;
}

Outcome learning_sanity() {
  std::ostringstream d;
  bool ok = true;
  for (auto mode : {AggregationMode::CdwFedAvg, AggregationMode::FedAvg}) {
    auto cfg = preset(mode);
    cfg.generated = scenario({6.0, 6.0, 8.0, 6.0});
    const auto acc = worst_accuracy(run_experiment(cfg).run);
    std::size_t first = 0;
    while (first < acc.size() && acc[first] < 0.95) ++first;
    d << to_string(mode) << " LR worst-client accuracy " << acc.back() << " (>=0.95 from round " << first + 1
      << ") ";
    ok = ok && first < acc.size() && acc.back() >= 0.95;
  }

  auto equal = preset(AggregationMode::CdwFedAvg);
  equal.generated = scenario({6.0, 6.0, 6.0, 6.0});
  const auto a = run_experiment(equal).run;
  equal.mode = AggregationMode::FedAvg;
  const auto b = run_experiment(equal).run;
  double gap = 0.0;
  for (std::size_t r = 0; r < a.reports.size(); ++r) {
    for (std::size_t c = 0; c < a.reports[r].evaluations.size(); ++c) {
      const auto& x = a.reports[r].evaluations[c].metrics;
      const auto& y = b.reports[r].evaluations[c].metrics;
      for (auto [p, q] : {std::pair{x.accuracy.value, y.accuracy.value}, {x.precision.value, y.precision.value},
                          {x.recall.value, y.recall.value}, {x.f1.value, y.f1.value}}) {
        gap = std::max(gap, std::fabs(p - q));
      }
    }
  }
  d << "equal-distance curve gap " << gap << " ";
  ok = ok && gap <= 1e-9;

  auto nn = preset(AggregationMode::CdwFedAvg);
  nn.model = ModelKind::NN;
  nn.rounds = 10;
  nn.generated = scenario({6.0, 6.0, 8.0, 6.0});
  const auto nn_acc = worst_accuracy(run_experiment(nn).run);
  d << "NN (10 rounds) worst-client accuracy " << nn_acc.back();
  ok = ok && nn_acc.back() >= 0.95;
  return {ok, d.str()};
}

Outcome determinism() {
  auto cfg = preset(AggregationMode::CdwFedAvg, 3);
  const std::string a = to_hex(sha256(rounds_csv(run_experiment(cfg).run)));
  cfg.workers = 4;
  const std::string b = to_hex(sha256(rounds_csv(run_experiment(cfg).run)));
  return {a == b, "sha256 " + a.substr(0, 16) + (a == b ? " == " : " != ") + b.substr(0, 16)};
}

Outcome pow_property() {
  auto cfg = preset(AggregationMode::FedAvg, 2);
  cfg.rounds = 8;
  cfg.epochs = 1;
  cfg.pow_difficulty = 0x4000;
  const auto o = run_experiment(cfg);
  // 2^256 / 2^14 = 2^242: the top 14 bits of a passing hash are zero
  std::size_t below = 0;
  for (const auto& b : o.ledger.blocks()) {
    below += b.block_hash == b.compute_hash() && b.block_hash[0] == 0 && b.block_hash[1] < 0x04;
  }
  const std::size_t n = o.ledger.blocks().size();
  return {below == n && o.ledger.verify_chain().ok,
          std::to_string(below) + "/" + std::to_string(n) + " block hashes below 2^242"};
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"communication overhead exactness", comm_exactness},
      {"CDW reduction property", cdw_reduction},
      {"gradient oracle", gradient_oracle},
      {"Merkle tamper suite", merkle_tamper},
      {"ledger replay and byte flips", ledger_replay},
      {"incentive conservation and ordering", incentive_conservation},
      {"learning sanity", learning_sanity},
      {"determinism", determinism},
      {"PoW property", pow_property},
  };
  int failed = 0;
  int id = 0;
  for (const auto& [name, check] : criteria) {
    ++id;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << id << " " << name << ": " << o.detail << " [" << secs << "s]"
              << std::endl;
  }
  return failed;
}
