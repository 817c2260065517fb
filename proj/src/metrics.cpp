#include "bcfl/metrics.hpp"

#include <cmath>

#include "bcfl/errors.hpp"

namespace bcfl {

ConfusionCounts confusion(const ModelParams& params, std::span<const Record> data,
                          double threshold) {
  if (data.empty()) throw ContractViolation("cannot evaluate on an empty dataset");
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ContractViolation("decision threshold must lie in (0, 1)");
  }
  ConfusionCounts c;
  for (const Record& r : data) {
    const bool predicted = positive_probability(params, r.features) >= threshold;
    if (r.label == 1) {
      predicted ? ++c.tp : ++c.fn;
    } else {
      predicted ? ++c.fp : ++c.tn;
    }
  }
  return c;
}

namespace {

Ratio ratio(std::uint64_t num, std::uint64_t den) {
  if (den == 0) return {0.0, true};
  return {static_cast<double>(num) / static_cast<double>(den), false};
}

}  // namespace

Ratio accuracy(const ConfusionCounts& c) { return ratio(c.tp + c.tn, c.total()); }
Ratio precision(const ConfusionCounts& c) { return ratio(c.tp, c.tp + c.fp); }
Ratio recall(const ConfusionCounts& c) { return ratio(c.tp, c.tp + c.fn); }

Ratio f1_score(const ConfusionCounts& c) {
  const Ratio p = precision(c);
  const Ratio r = recall(c);
  if (p.undefined || r.undefined || p.value + r.value == 0.0) return {0.0, true};
  return {2.0 * p.value * r.value / (p.value + r.value), false};
}

ClassificationMetrics summarize(const ConfusionCounts& c) {
  return {accuracy(c), precision(c), recall(c), f1_score(c)};
}

std::string ClassificationMetrics::undefined_flags() const {
  std::string out;
  auto add = [&](const Ratio& r, const char* name) {
    if (!r.undefined) return;
    if (!out.empty()) out += '|';
    out += name;
  };
  add(accuracy, "accuracy");
  add(precision, "precision");
  add(recall, "recall");
  add(f1, "f1");
  return out.empty() ? "none" : out;
}

double centroid_distance(std::span<const Record> data) {
  FeatureVector pos{}, neg{};
  std::size_t n_pos = 0, n_neg = 0;
  for (const Record& r : data) {
    FeatureVector& acc = r.label == 1 ? pos : neg;
    (r.label == 1 ? n_pos : n_neg)++;
    for (std::size_t i = 0; i < kFeatureCount; ++i) acc[i] += r.features[i];
  }
  if (n_pos == 0) throw MissingClassError(1);
  if (n_neg == 0) throw MissingClassError(0);

  double sq = 0.0;
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    const double d = pos[i] / static_cast<double>(n_pos) - neg[i] / static_cast<double>(n_neg);
    sq += d * d;
  }
  return std::sqrt(sq);
}

}  // namespace bcfl
