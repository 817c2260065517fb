#include "bcfl/dataset.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>

#include "bcfl/errors.hpp"
#include "bcfl/rng.hpp"

namespace bcfl {

const std::array<std::string_view, kFeatureCount> kSensorNames = {
    "evaporator_inlet_water_temperature",
    "evaporator_outlet_water_temperature",
    "condenser_inlet_water_temperature",
    "condenser_outlet_water_temperature",
    "evaporator_cooling_capacity",
    "compressor_inlet_air_temperature",
    "compressor_outlet_air_temperature",
    "evaporator_inlet_air_pressure",
    "condenser_outlet_air_pressure",
    "exhaust_air_overheat_temperature",
    "main_circuit_coolant_level",
    "main_coolant_pipe_valve_opening",
    "compressor_load",
    "compressor_current",
    "compressor_rotational_speed",
    "compressor_voltage",
    "compressor_power",
    "compressor_inverter_temperature",
};

namespace {

void check_spec(const ClientDataGenSpec& spec) {
  if (spec.client_id.empty()) throw ContractViolation("client id must not be empty");
  if (spec.n_train == 0 || spec.n_test == 0) {
    throw ContractViolation("client " + spec.client_id + ": n_train and n_test must be positive");
  }
  if (!(spec.positive_fraction > 0.0 && spec.positive_fraction < 1.0)) {
    throw ContractViolation("client " + spec.client_id + ": positive_fraction must lie in (0, 1)");
  }
  if (!(spec.centroid_separation >= 0.0) || !std::isfinite(spec.centroid_separation)) {
    throw ContractViolation("client " + spec.client_id +
                            ": centroid_separation must be finite and non-negative");
  }
  if (!(spec.covariance_scale > 0.0) || !std::isfinite(spec.covariance_scale)) {
    throw ContractViolation("client " + spec.client_id + ": covariance_scale must be positive");
  }
}

FeatureVector unit_direction(std::uint64_t seed) {
  Rng rng(seed);
  FeatureVector u{};
  double norm = 0.0;
  while (norm == 0.0) {
    for (double& x : u) x = rng.normal();
    norm = 0.0;
    for (double x : u) norm += x * x;
    norm = std::sqrt(norm);
  }
  for (double& x : u) x /= norm;
  return u;
}

std::vector<Record> generate_split(const ClientDataGenSpec& spec, const FeatureVector& direction,
                                   std::size_t n, Rng& rng, const char* split) {
  const auto n_pos = static_cast<std::size_t>(std::llround(static_cast<double>(n) * spec.positive_fraction));
  if (n_pos == 0 || n_pos == n) {
    throw ContractViolation("client " + spec.client_id + ": " + split + " split of " +
                            std::to_string(n) + " records cannot hold both classes at fraction " +
                            format_number(spec.positive_fraction));
  }
  const double sigma = std::sqrt(spec.covariance_scale);
  const double half = spec.centroid_separation / 2.0;

  std::vector<Record> records(n);
  for (std::size_t i = 0; i < n; ++i) {
    records[i].label = i < n_pos ? 1 : 0;
    for (double& f : records[i].features) f = sigma * rng.normal();
  }

  // Recenter each class onto its target mean.
  for (int label : {1, 0}) {
    const std::size_t begin = label == 1 ? 0 : n_pos;
    const std::size_t end = label == 1 ? n_pos : n;
    FeatureVector mean{};
    for (std::size_t i = begin; i < end; ++i) {
      for (std::size_t j = 0; j < kFeatureCount; ++j) mean[j] += records[i].features[j];
    }
    const double sign = label == 1 ? 1.0 : -1.0;
    for (std::size_t j = 0; j < kFeatureCount; ++j) {
      mean[j] /= static_cast<double>(end - begin);
      const double target = sign * half * direction[j];
      for (std::size_t i = begin; i < end; ++i) records[i].features[j] += target - mean[j];
    }
  }

  rng.shuffle(std::span<Record>(records));
  return records;
}

}  // namespace

ClientDataset generate(const ClientDataGenSpec& spec) {
  check_spec(spec);
  const FeatureVector direction = unit_direction(spec.direction_seed);
  Rng train_rng(combine_seed(spec.seed, 1));
  Rng test_rng(combine_seed(spec.seed, 2));
  ClientDataset out;
  out.client_id = spec.client_id;
  out.train = generate_split(spec, direction, spec.n_train, train_rng, "train");
  out.test = generate_split(spec, direction, spec.n_test, test_rng, "test");
  return out;
}

std::vector<ClientDataGenSpec> paper_scenario(std::uint64_t seed) {
  constexpr std::array<double, 4> kSeparation = {1.0, 1.0, 4.0, 1.0};
  const std::uint64_t direction_seed = combine_seed(seed, 0xd17ec7);
  std::vector<ClientDataGenSpec> specs;
  for (std::size_t k = 0; k < kSeparation.size(); ++k) {
    ClientDataGenSpec s;
    s.client_id = "client" + std::to_string(k + 1);
    s.centroid_separation = kSeparation[k];
    s.seed = combine_seed(seed, k + 1);
    s.direction_seed = direction_seed;
    specs.push_back(std::move(s));
  }
  return specs;
}

std::string records_to_csv(std::span<const Record> records) {
  std::string out;
  for (std::string_view name : kSensorNames) {
    out += name;
    out += ',';
  }
  out += "label\n";
  for (const Record& r : records) {
    validate(r);
    for (double f : r.features) {
      out += format_number(f);
      out += ',';
    }
    out += r.label == 1 ? "1\n" : "0\n";
  }
  return out;
}

std::vector<Record> records_from_csv(std::string_view text) {
  std::vector<Record> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool saw_header = false;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;

    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      cells.push_back(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (cells.size() != kFeatureCount + 1) {
      throw ParseError(line_no, "expected " + std::to_string(kFeatureCount + 1) + " columns, got " +
                                    std::to_string(cells.size()));
    }
    if (!saw_header) {
      saw_header = true;
      if (cells.back() != "label") throw ParseError(line_no, "header must end with 'label'");
      continue;
    }

    Record r;
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
      const auto v = parse_number(cells[i]);
      if (!v || !std::isfinite(*v)) {
        throw ParseError(line_no, "column " + std::to_string(i + 1) + " is not a finite number");
      }
      r.features[i] = *v;
    }
    if (cells.back() == "0") {
      r.label = 0;
    } else if (cells.back() == "1") {
      r.label = 1;
    } else {
      throw ParseError(line_no, "label must be 0 or 1");
    }
    out.push_back(r);
  }
  if (!saw_header) throw ParseError(line_no == 0 ? 1 : line_no, "file is empty");
  if (out.empty()) throw ParseError(line_no, "file has a header but no records");
  return out;
}

void save_csv(std::span<const Record> records, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f << records_to_csv(records);
  if (!f) throw std::runtime_error("failed writing " + path.string());
}

std::vector<Record> load_csv(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  try {
    return records_from_csv(ss.str());
  } catch (const ParseError& e) {
    throw ParseError(e.line(), e.detail(), path.string());
  }
}

void save_dataset(const ClientDataset& dataset, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_csv(dataset.train, dir / (dataset.client_id + "_train.csv"));
  save_csv(dataset.test, dir / (dataset.client_id + "_test.csv"));
}

ClientDataset load_dataset(const std::string& client_id, const std::filesystem::path& train_csv,
                           const std::filesystem::path& test_csv) {
  return ClientDataset{client_id, load_csv(train_csv), load_csv(test_csv)};
}

std::vector<std::uint8_t> serialize_records(std::span<const Record> records) {
  std::vector<std::uint8_t> out;
  out.reserve(records.size() * kRecordWireBytes);
  for (const Record& r : records) {
    for (double f : r.features) {
      const auto bits = std::bit_cast<std::uint64_t>(f);
      for (int shift = 0; shift < 64; shift += 8) out.push_back(static_cast<std::uint8_t>(bits >> shift));
    }
    out.push_back(static_cast<std::uint8_t>(r.label));
  }
  return out;
}

}  // namespace bcfl
