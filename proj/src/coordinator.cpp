#include "bcfl/coordinator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <numeric>
#include <optional>
#include <set>
#include <thread>

#include "bcfl/errors.hpp"
#include "bcfl/incentive.hpp"
#include "bcfl/rng.hpp"

namespace bcfl {

std::string_view to_string(AggregationMode mode) {
  switch (mode) {
    case AggregationMode::FedAvg: return "fedavg";
    case AggregationMode::CdwFedAvg: return "cdw_fedavg";
    case AggregationMode::Centralized: return "centralized";
    case AggregationMode::Local: return "local";
  }
  return "?";
}

AggregationMode aggregation_mode_from_string(std::string_view name) {
  if (name == "fedavg") return AggregationMode::FedAvg;
  if (name == "cdw_fedavg") return AggregationMode::CdwFedAvg;
  if (name == "centralized") return AggregationMode::Centralized;
  if (name == "local") return AggregationMode::Local;
  throw ContractViolation("unknown mode '" + std::string(name) +
                          "' (expected cdw_fedavg, fedavg, centralized or local)");
}

// --- aggregation -------------------------------------------------------------

namespace {

void require_updates(std::span<const ClientUpdate> updates) {
  if (updates.empty()) throw ContractViolation("aggregation needs at least one update");
  const ModelKind kind = updates.front().params.kind();
  for (const auto& u : updates) {
    if (u.params.kind() != kind) throw ContractViolation("updates have mismatched model layouts");
    if (u.data_size == 0) throw ContractViolation("update from " + u.client_id + " has no data");
  }
}

std::vector<double> normalize(std::vector<double> raw) {
  double total = 0.0;
  for (double v : raw) total += v;
  for (double& v : raw) v /= total;
  return raw;
}

}  // namespace

std::vector<double> fedavg_weights(std::span<const ClientUpdate> updates) {
  require_updates(updates);
  std::vector<double> raw;
  raw.reserve(updates.size());
  for (const auto& u : updates) raw.push_back(static_cast<double>(u.data_size));
  return normalize(std::move(raw));
}

std::vector<double> cdw_weights(std::span<const ClientUpdate> updates) {
  require_updates(updates);
  std::vector<double> raw;
  raw.reserve(updates.size());
  for (const auto& u : updates) {
    if (!(u.distance > 0.0) || !std::isfinite(u.distance)) {
      throw DegenerateDistanceError("client " + u.client_id + " has centroid distance " +
                                    format_number(u.distance) + "; CDW weighting needs d > 0");
    }
    raw.push_back(static_cast<double>(u.data_size) / u.distance);
  }
  return normalize(std::move(raw));
}

ModelParams weighted_average(std::span<const ClientUpdate> updates, std::span<const double> weights) {
  require_updates(updates);
  if (weights.size() != updates.size()) throw ContractViolation("one weight per update required");
  const std::size_t n = updates.front().params.size();
  std::vector<double> out(n, 0.0);
  for (std::size_t k = 0; k < updates.size(); ++k) {
    const auto p = updates[k].params.values();
    const double w = weights[k];
    for (std::size_t j = 0; j < n; ++j) out[j] += w * p[j];
  }
  return ModelParams(updates.front().params.kind(), std::move(out));
}

ModelParams aggregate_fedavg(std::span<const ClientUpdate> updates) {
  return weighted_average(updates, fedavg_weights(updates));
}

ModelParams aggregate_cdw(std::span<const ClientUpdate> updates) {
  return weighted_average(updates, cdw_weights(updates));
}

// --- selection ------------------------------------------------------------------

std::vector<std::string> select_clients(std::span<const ClientDataset> registry, std::size_t k,
                                        std::uint64_t round_no, std::uint64_t seed) {
  if (k == 0) throw ContractViolation("must select at least one client");
  if (k > registry.size()) {
    throw ContractViolation("cannot select " + std::to_string(k) + " clients from a registry of " +
                            std::to_string(registry.size()));
  }
  std::vector<std::size_t> idx(registry.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (k < registry.size()) {
    Rng rng(combine_seed(seed, round_no));
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.index(registry.size() - i));
      std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
  }
  std::vector<std::string> out;
  out.reserve(k);
  for (std::size_t i : idx) out.push_back(registry[i].client_id);
  return out;
}

void CommLedger::record(std::uint64_t round_no, std::uint64_t uplink, std::uint64_t downlink) {
  entries_.push_back({round_no, uplink, downlink});
  uplink_total_ += uplink;
  downlink_total_ += downlink;
}

// --- rounds ---------------------------------------------------------------------

namespace {

const ClientDataset& find_client(std::span<const ClientDataset> clients, const std::string& id) {
  for (const auto& c : clients) {
    if (c.client_id == id) return c;
  }
  throw ContractViolation("unknown client " + id);
}

void require_unique_ids(std::span<const ClientDataset> clients) {
  std::set<std::string> ids;
  for (const auto& c : clients) {
    if (!ids.insert(c.client_id).second) throw ContractViolation("duplicate client id " + c.client_id);
  }
}

double distance_or_zero(std::span<const Record> data) {
  try {
    return centroid_distance(data);
  } catch (const MissingClassError&) {
    return 0.0;
  }
}

ClientEvaluation evaluate(const ModelParams& model, const ClientDataset& client, double threshold) {
  ClientEvaluation e;
  e.client_id = client.client_id;
  e.counts = confusion(model, client.test, threshold);
  e.metrics = summarize(e.counts);
  return e;
}

std::vector<ClientEvaluation> evaluate_all(const ModelParams& model,
                                           std::span<const ClientDataset> clients, double threshold) {
  std::vector<ClientEvaluation> out;
  for (const auto& c : clients) {
    if (!c.test.empty()) out.push_back(evaluate(model, c, threshold));
  }
  return out;
}

// Runs fn(i) for i in [0, n) on up to `workers` threads. Exceptions are
// captured per index.
template <class Fn>
std::vector<std::exception_ptr> parallel_for(std::size_t n, std::size_t workers, Fn fn) {
  std::vector<std::exception_ptr> errors(n);
  auto guarded = [&](std::size_t i) {
    try {
      fn(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const std::size_t threads = std::min(std::max<std::size_t>(workers, 1), n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) guarded(i);
    return errors;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) guarded(i);
    });
  }
  for (auto& th : pool) th.join();
  return errors;
}

// Rethrows the first error, attaching the round number to divergence errors.
void rethrow_with_round(const std::exception_ptr& e, std::uint64_t round_no) {
  try {
    std::rethrow_exception(e);
  } catch (const DivergenceError& d) {
    throw DivergenceError(d.epoch(), round_no);
  }
}

SgdConfig client_sgd(const SgdConfig& base, std::uint64_t master, std::string_view key,
                     std::uint64_t round_no) {
  SgdConfig cfg = base;
  cfg.rng_seed = stream_seed(master, key, round_no);
  return cfg;
}

}  // namespace

RoundResult run_round(const RoundPlan& plan, const ModelParams& global,
                      std::span<const ClientDataset> clients, AggregationMode mode,
                      RoundContext& ctx) {
  if (!is_federated(mode)) throw ContractViolation("run_round needs a federated mode");
  if (plan.selected_clients.empty()) throw ContractViolation("round needs at least one client");
  if (plan.round_no == 0) throw ContractViolation("round numbers start at 1");
  std::set<std::string> unique(plan.selected_clients.begin(), plan.selected_clients.end());
  if (unique.size() != plan.selected_clients.size()) {
    throw ContractViolation("selected client ids must be distinct");
  }

  std::vector<const ClientDataset*> selected;
  for (const auto& id : plan.selected_clients) selected.push_back(&find_client(clients, id));

  RoundReport report;
  report.round_no = plan.round_no;
  report.mode = mode;
  report.selected = plan.selected_clients;

  if (ctx.incentives) ctx.incentives->register_selection(plan.round_no, plan.selected_clients);

  const std::uint64_t model_bytes = serialized_size(global.kind());
  const std::size_t k = selected.size();
  report.downlink_bytes = model_bytes * k;

  std::vector<std::optional<ClientUpdate>> updates(k);
  auto errors = parallel_for(k, ctx.workers, [&](std::size_t i) {
    const ClientDataset& c = *selected[i];
    if (ctx.client_fails && ctx.client_fails(plan.round_no, c.client_id)) {
      throw ClientFailure(c.client_id);
    }
    if (c.train.empty()) throw ContractViolation("client " + c.client_id + " has no training data");
    const double d = mode == AggregationMode::CdwFedAvg ? centroid_distance(c.train)
                                                        : distance_or_zero(c.train);
    ModelParams trained =
        sgd_update(global, c.train, client_sgd(plan.sgd, plan.sgd.rng_seed, c.client_id, plan.round_no));
    updates[i] = ClientUpdate{c.client_id, std::move(trained), c.train.size(), d};
  });

  std::vector<std::string> failed;
  for (std::size_t i = 0; i < k; ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const ClientFailure& f) {
      failed.push_back(f.client_id());
    } catch (...) {
      rethrow_with_round(errors[i], plan.round_no);
    }
  }

  std::vector<ClientUpdate> done;
  for (auto& u : updates) {
    if (u) done.push_back(std::move(*u));
  }
  report.uplink_bytes = model_bytes * done.size();
  for (const auto& u : done) {
    report.data_sizes.push_back(u.data_size);
    report.distances.push_back(u.distance);
  }

  if (!failed.empty()) {
    report.aborted = true;
    report.abort_reason = "client failure:";
    for (const auto& f : failed) report.abort_reason += " " + f;
    if (ctx.comm) ctx.comm->record(plan.round_no, report.uplink_bytes, report.downlink_bytes);
    report.evaluations = evaluate_all(global, clients, ctx.threshold);
    return {global, std::move(report)};
  }

  report.weights = mode == AggregationMode::CdwFedAvg ? cdw_weights(done) : fedavg_weights(done);
  ModelParams next = weighted_average(done, report.weights);

  if (ctx.incentives) {
    for (const auto& u : done) {
      if (!(u.distance > 0.0)) continue;
      ctx.incentives->upd_status(u.client_id, plan.round_no, u.data_size, u.distance);
      report.token_events.push_back({u.client_id, ctx.incentives->cal_incentive(u.client_id, plan.round_no)});
    }
  }
  if (ctx.comm) ctx.comm->record(plan.round_no, report.uplink_bytes, report.downlink_bytes);

  report.evaluations = evaluate_all(next, clients, ctx.threshold);
  return {std::move(next), std::move(report)};
}

ModelParams initial_model(ModelKind kind, std::uint64_t master_seed) {
  return ModelParams::initial(kind, combine_seed(master_seed, 0x1417));
}

RunResult run_federated(std::span<const ClientDataset> clients, AggregationMode mode,
                        const RunSettings& settings, RunHooks hooks) {
  if (!is_federated(mode)) throw ContractViolation("run_federated needs a federated mode");
  require_unique_ids(clients);

  RunResult result;
  ModelParams global = initial_model(settings.kind, settings.master_seed);
  RoundContext ctx;
  ctx.incentives = hooks.incentives;
  ctx.comm = &result.comm;
  ctx.client_fails = hooks.client_fails;
  ctx.workers = settings.workers;
  ctx.threshold = settings.threshold;

  for (std::uint64_t t = 1; t <= settings.rounds; ++t) {
    if (hooks.before_round) hooks.before_round(t);
    RoundPlan plan;
    plan.round_no = t;
    plan.selected_clients = select_clients(clients, settings.clients_per_round, t, settings.master_seed);
    plan.sgd = settings.sgd;
    plan.sgd.rng_seed = settings.master_seed;
    RoundResult r = run_round(plan, global, clients, mode, ctx);
    global = std::move(r.global);
    if (hooks.after_round) hooks.after_round(r.report, std::span<const ModelParams>(&global, 1));
    result.reports.push_back(std::move(r.report));
  }
  result.final_models.push_back(std::move(global));
  return result;
}

RunResult run_centralized(std::span<const ClientDataset> clients, const RunSettings& settings,
                          RunHooks hooks) {
  require_unique_ids(clients);
  std::vector<Record> merged;
  std::string key;
  for (const auto& c : clients) {
    if (c.train.empty()) continue;
    merged.insert(merged.end(), c.train.begin(), c.train.end());
    if (!key.empty()) key += '+';
    key += c.client_id;
  }
  if (merged.empty()) throw ContractViolation("centralized training needs at least one record");
  const std::uint64_t upload = serialize_records(merged).size();

  RunResult result;
  ModelParams model = initial_model(settings.kind, settings.master_seed);
  for (std::uint64_t t = 1; t <= settings.rounds; ++t) {
    if (hooks.before_round) hooks.before_round(t);
    try {
      model = sgd_update(model, merged, client_sgd(settings.sgd, settings.master_seed, key, t));
    } catch (const DivergenceError& d) {
      throw DivergenceError(d.epoch(), t);
    }
    RoundReport report;
    report.round_no = t;
    report.mode = AggregationMode::Centralized;
    report.uplink_bytes = t == 1 ? upload : 0;
    result.comm.record(t, report.uplink_bytes, 0);
    report.evaluations = evaluate_all(model, clients, settings.threshold);
    if (hooks.after_round) hooks.after_round(report, std::span<const ModelParams>(&model, 1));
    result.reports.push_back(std::move(report));
  }
  result.final_models.push_back(std::move(model));
  return result;
}

RunResult run_local(std::span<const ClientDataset> clients, const RunSettings& settings,
                    RunHooks hooks) {
  require_unique_ids(clients);
  for (const auto& c : clients) {
    if (c.train.empty()) throw ContractViolation("client " + c.client_id + " has no training data");
  }

  RunResult result;
  std::vector<ModelParams> models(clients.size(), initial_model(settings.kind, settings.master_seed));
  for (std::uint64_t t = 1; t <= settings.rounds; ++t) {
    if (hooks.before_round) hooks.before_round(t);
    auto errors = parallel_for(clients.size(), settings.workers, [&](std::size_t i) {
      models[i] = sgd_update(models[i], clients[i].train,
                             client_sgd(settings.sgd, settings.master_seed, clients[i].client_id, t));
    });
    for (const auto& e : errors) {
      if (e) rethrow_with_round(e, t);
    }

    RoundReport report;
    report.round_no = t;
    report.mode = AggregationMode::Local;
    result.comm.record(t, 0, 0);
    for (std::size_t i = 0; i < clients.size(); ++i) {
      if (!clients[i].test.empty()) {
        report.evaluations.push_back(evaluate(models[i], clients[i], settings.threshold));
      }
    }
    if (hooks.after_round) hooks.after_round(report, models);
    result.reports.push_back(std::move(report));
  }
  result.final_models = std::move(models);
  return result;
}

RunResult run_mode(AggregationMode mode, std::span<const ClientDataset> clients,
                   const RunSettings& settings, RunHooks hooks) {
  switch (mode) {
    case AggregationMode::Centralized: return run_centralized(clients, settings, std::move(hooks));
    case AggregationMode::Local: return run_local(clients, settings, std::move(hooks));
    default: return run_federated(clients, mode, settings, std::move(hooks));
  }
}

}  // namespace bcfl
