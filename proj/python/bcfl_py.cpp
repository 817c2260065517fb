#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "bcfl/anchoring.hpp"
#include "bcfl/coordinator.hpp"
#include "bcfl/dataset.hpp"
#include "bcfl/errors.hpp"
#include "bcfl/experiment.hpp"
#include "bcfl/metrics.hpp"

namespace py = pybind11;
using namespace bcfl;

namespace {

// Records cross the boundary as (features, label) tuples.
using PyRecord = std::pair<std::vector<double>, int>;

Record to_record(const PyRecord& r) {
  if (r.first.size() != kFeatureCount) {
    throw ContractViolation("record needs " + std::to_string(kFeatureCount) + " features, got " +
                            std::to_string(r.first.size()));
  }
  Record out;
  std::copy(r.first.begin(), r.first.end(), out.features.begin());
  out.label = r.second;
  return out;
}

std::vector<Record> to_records(const std::vector<PyRecord>& rs) {
  std::vector<Record> out;
  out.reserve(rs.size());
  for (const auto& r : rs) out.push_back(to_record(r));
  return out;
}

std::vector<PyRecord> from_records(const std::vector<Record>& rs) {
  std::vector<PyRecord> out;
  out.reserve(rs.size());
  for (const auto& r : rs) out.emplace_back(std::vector<double>(r.features.begin(), r.features.end()), r.label);
  return out;
}

std::vector<ClientUpdate> to_updates(const std::vector<std::vector<double>>& params,
                                     const std::vector<std::uint64_t>& sizes,
                                     const std::vector<double>& distances) {
  if (params.size() != sizes.size() || sizes.size() != distances.size()) {
    throw ContractViolation("params, sizes and distances must have the same length");
  }
  std::vector<ClientUpdate> out;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const ModelKind kind = params[i].size() == parameter_count(ModelKind::LR) ? ModelKind::LR : ModelKind::NN;
    out.push_back({"c" + std::to_string(i), ModelParams(kind, params[i]), sizes[i], distances[i]});
  }
  return out;
}

py::dict spec_dict(const ClientDataGenSpec& s) {
  py::dict d;
  d["client_id"] = s.client_id;
  d["n_train"] = s.n_train;
  d["n_test"] = s.n_test;
  d["positive_fraction"] = s.positive_fraction;
  d["centroid_separation"] = s.centroid_separation;
  d["covariance_scale"] = s.covariance_scale;
  d["seed"] = s.seed;
  d["direction_seed"] = s.direction_seed;
  return d;
}

}  // namespace

PYBIND11_MODULE(_bcfl, m) {
  m.doc() = "Bindings for the bcfl simulator core";

  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<DivergenceError>(m, "DivergenceError", PyExc_ArithmeticError);
  py::register_exception<LedgerRejection>(m, "LedgerRejection", PyExc_RuntimeError);
  py::register_exception<NotFound>(m, "MissingAnchor", PyExc_LookupError);

  m.def("canonicalize", [](const PyRecord& r) { return canonicalize(to_record(r)); }, py::arg("record"));
  m.def(
      "merkle_root", [](const std::vector<PyRecord>& rs) { return to_hex(merkle_root(to_records(rs))); },
      py::arg("records"), "Hex Merkle root of records in order.");
  m.def(
      "centroid_distance", [](const std::vector<PyRecord>& rs) { return centroid_distance(to_records(rs)); },
      py::arg("records"));

  m.def(
      "fedavg_weights",
      [](const std::vector<std::uint64_t>& sizes) {
        std::vector<ClientUpdate> ups;
        for (auto s : sizes) ups.push_back({"", ModelParams(ModelKind::LR, std::vector<double>(18)), s, 1.0});
        return fedavg_weights(ups);
      },
      py::arg("sizes"));
  m.def(
      "cdw_weights",
      [](const std::vector<std::uint64_t>& sizes, const std::vector<double>& distances) {
        return cdw_weights(to_updates(std::vector<std::vector<double>>(sizes.size(), std::vector<double>(18)),
                                      sizes, distances));
      },
      py::arg("sizes"), py::arg("distances"));
  m.def(
      "aggregate",
      [](const std::string& mode, const std::vector<std::vector<double>>& params,
         const std::vector<std::uint64_t>& sizes, const std::vector<double>& distances) {
        const auto ups = to_updates(params, sizes, distances);
        const AggregationMode am = aggregation_mode_from_string(mode);
        if (!is_federated(am)) throw ContractViolation("aggregate needs fedavg or cdw_fedavg");
        const ModelParams out = am == AggregationMode::FedAvg ? aggregate_fedavg(ups) : aggregate_cdw(ups);
        return std::vector<double>(out.values().begin(), out.values().end());
      },
      py::arg("mode"), py::arg("params"), py::arg("sizes"), py::arg("distances"));
  m.def(
      "serialized_size", [](const std::string& kind) { return serialized_size(model_kind_from_string(kind)); },
      py::arg("kind"));

  m.def(
      "generate",
      [](const std::string& client_id, std::size_t n_train, std::size_t n_test, double separation,
         std::uint64_t seed, double positive_fraction, double covariance_scale, std::uint64_t direction_seed) {
        ClientDataGenSpec s;
        s.client_id = client_id;
        s.n_train = n_train;
        s.n_test = n_test;
        s.centroid_separation = separation;
        s.seed = seed;
        s.positive_fraction = positive_fraction;
        s.covariance_scale = covariance_scale;
        s.direction_seed = direction_seed;
        const ClientDataset d = generate(s);
        return std::make_pair(from_records(d.train), from_records(d.test));
      },
      py::arg("client_id"), py::arg("n_train") = 1000, py::arg("n_test") = 1000, py::arg("separation") = 1.0,
      py::arg("seed") = 0, py::arg("positive_fraction") = 0.5, py::arg("covariance_scale") = 1.0,
      py::arg("direction_seed") = 0, "Returns (train, test) lists of (features, label).");
  m.def(
      "paper_scenario",
      [](std::uint64_t seed) {
        py::list out;
        for (const auto& s : paper_scenario(seed)) out.append(spec_dict(s));
        return out;
      },
      py::arg("seed") = 2021, "Generator specs of the four-client preset, as config dicts.");

  m.def(
      "run_json",
      [](const std::string& config_json, bool write) {
        const ExperimentConfig cfg = config_from_json(config_json);
        validate(cfg);
        ExperimentOutcome o = [&] {
          py::gil_scoped_release release;
          return run_experiment(cfg);
        }();
        if (write) write_artifacts(cfg, o);
        return summary_json(cfg, o);
      },
      py::arg("config_json"), py::arg("write") = false);

  m.def(
      "verify_snapshot",
      [](const std::string& text) {
        const VerifyResult v = verify_snapshot(text);
        py::dict d;
        d["ok"] = v.ok;
        d["first_invalid_height"] = v.first_invalid_height ? py::cast(*v.first_invalid_height) : py::none();
        d["reason"] = v.reason;
        return d;
      },
      py::arg("text"));
}
