#include "doctest.h"

#include <fstream>

#include "bcfl/dataset.hpp"
#include "bcfl/errors.hpp"
#include "bcfl/metrics.hpp"
#include "support.hpp"

using namespace bcfl;

namespace {

ClientDataGenSpec spec_with(double separation, std::uint64_t seed = 5) {
  ClientDataGenSpec s;
  s.client_id = "c";
  s.centroid_separation = separation;
  s.seed = seed;
  s.direction_seed = seed + 100;
  return s;
}

std::size_t positives(const std::vector<Record>& rs) {
  std::size_t n = 0;
  for (const auto& r : rs) n += r.label == 1;
  return n;
}

std::string csv_header() {
  std::string h;
  for (auto name : kSensorNames) h += std::string(name) + ',';
  return h + "label\n";
}

std::string zero_row(std::size_t columns, const std::string& label = "0") {
  std::string row;
  for (std::size_t i = 0; i + 1 < columns; ++i) row += "0,";
  return row + label + "\n";
}

std::size_t parse_error_line(const std::string& text) {
  try {
    records_from_csv(text);
  } catch (const ParseError& e) {
    return e.line();
  }
  return 0;
}

}  // namespace

TEST_CASE("measured separation tracks the target") {
  for (double sep : {0.5, 1.0, 4.0, 7.5}) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      const auto ds = generate(spec_with(sep, seed));
      const double d = centroid_distance(ds.train);
      CHECK(d >= 0.9 * sep);
      CHECK(d <= 1.1 * sep);
      CHECK(centroid_distance(ds.test) == doctest::Approx(sep).epsilon(0.1));
    }
  }
  const double d4 = centroid_distance(generate(spec_with(4.0)).train);
  CHECK(d4 >= 3.6);
  CHECK(d4 <= 4.4);
}

TEST_CASE("zero separation gives coincident means") {
  const auto ds = generate(spec_with(0.0));
  // 3 sigma / sqrt(n) bound on the mean gap
  CHECK(centroid_distance(ds.train) < 3.0 / std::sqrt(1000.0));
}

TEST_CASE("separation is monotone") {
  double last = -1.0;
  for (double sep : {0.0, 0.25, 1.0, 2.0, 4.0, 8.0}) {
    const double d = centroid_distance(generate(spec_with(sep)).train);
    CHECK(d > last);
    last = d;
  }
}

TEST_CASE("class counts follow the fraction") {
  for (double frac : {0.1, 0.25, 0.5, 0.73}) {
    auto s = spec_with(1.0);
    s.positive_fraction = frac;
    s.n_train = 777;
    s.n_test = 301;
    const auto ds = generate(s);
    CHECK(ds.train.size() == 777);
    CHECK(ds.test.size() == 301);
    CHECK(std::fabs(static_cast<double>(positives(ds.train)) - 777 * frac) <= 1.0);
    CHECK(std::fabs(static_cast<double>(positives(ds.test)) - 301 * frac) <= 1.0);
  }
}

TEST_CASE("within-class spread matches the covariance scale") {
  auto s = spec_with(3.0);
  s.covariance_scale = 2.5;
  s.n_train = 4000;
  const auto ds = generate(s);
  for (int label : {0, 1}) {
    double sq = 0;
    std::size_t n = 0;
    for (const auto& r : ds.train) {
      if (r.label != label) continue;
      for (double f : r.features) sq += f * f;
      n += kFeatureCount;
    }
    // per-feature means are +-1.5 u_j; subtracting them leaves 18 * 2.5 total variance
    const double half = 1.5;
    const double var = (sq - half * half * static_cast<double>(n / kFeatureCount)) / static_cast<double>(n);
    CHECK(var == doctest::Approx(2.5).epsilon(0.05));
  }
}

TEST_CASE("generation is deterministic") {
  CHECK(generate(spec_with(2.0)) == generate(spec_with(2.0)));
  CHECK_FALSE(generate(spec_with(2.0, 5)) == generate(spec_with(2.0, 6)));
}

TEST_CASE("invalid generator specs") {
  auto s = spec_with(1.0);
  s.client_id = "";
  CHECK_THROWS_AS(generate(s), ContractViolation);
  for (double frac : {0.0, 1.0, -0.1}) {
    s = spec_with(0.0);
    s.positive_fraction = frac;
    CHECK_THROWS_AS(generate(s), ContractViolation);
  }
  s = spec_with(1.0);
  s.n_train = 0;
  CHECK_THROWS_AS(generate(s), ContractViolation);
  s = spec_with(-1.0);
  CHECK_THROWS_AS(generate(s), ContractViolation);
  s = spec_with(1.0);
  s.covariance_scale = 0.0;
  CHECK_THROWS_AS(generate(s), ContractViolation);
  s = spec_with(1.0);
  s.n_test = 1;
  CHECK_THROWS_AS(generate(s), ContractViolation);
}

TEST_CASE("four-client preset") {
  const auto specs = paper_scenario();
  REQUIRE(specs.size() == 4);
  std::vector<double> d;
  for (const auto& s : specs) {
    const auto ds = generate(s);
    CHECK(ds.train.size() == 1000);
    CHECK(ds.test.size() == 1000);
    d.push_back(centroid_distance(ds.train));
  }
  CHECK(specs[2].client_id == "client3");
  CHECK(d[2] > d[0]);
  CHECK(d[2] > d[1]);
  CHECK(d[2] > d[3]);
  const auto again = paper_scenario();
  for (std::size_t i = 0; i < 4; ++i) CHECK(generate(again[i]) == generate(specs[i]));
  CHECK(paper_scenario(7)[0].seed != specs[0].seed);
}

TEST_CASE("csv round trip") {
  const auto ds = generate(spec_with(1.5));
  const std::string text = records_to_csv(ds.train);
  CHECK(text.rfind(csv_header(), 0) == 0);
  CHECK(text.rfind("evaporator_inlet_water_temperature,", 0) == 0);
  CHECK(records_from_csv(text) == ds.train);

  const auto dir = testutil::scratch_dir("datagen_csv");
  save_dataset(ds, dir);
  CHECK(load_dataset("c", dir / "c_train.csv", dir / "c_test.csv") == ds);
  CHECK_THROWS(load_csv(dir / "missing.csv"));
}

TEST_CASE("csv errors carry the line number") {
  const std::string h = csv_header();
  CHECK(parse_error_line("") == 1);
  CHECK(parse_error_line(h) == 1);
  CHECK(parse_error_line(h + zero_row(19) + zero_row(20)) == 3);
  CHECK(parse_error_line(h + zero_row(18)) == 2);
  CHECK(parse_error_line(h + zero_row(19, "2")) == 2);
  CHECK(parse_error_line(h + zero_row(19) + zero_row(19) + "x" + zero_row(19).substr(1)) == 4);
  CHECK(parse_error_line(h + "nan," + zero_row(19).substr(2)) == 2);
  CHECK(records_from_csv(h + zero_row(19) + "\r\n").size() == 1);

  const auto dir = testutil::scratch_dir("datagen_bad");
  std::ofstream(dir / "bad.csv") << h << zero_row(20);
  try {
    load_csv(dir / "bad.csv");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
    CHECK(std::string(e.what()).find("bad.csv") != std::string::npos);
  }
}

TEST_CASE("wire size of a record set") {
  Rng rng(51);
  const auto rs = testutil::random_records(rng, 7);
  CHECK(serialize_records(rs).size() == 7 * kRecordWireBytes);
  CHECK(kRecordWireBytes == 145);
}
