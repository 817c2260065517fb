#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "bcfl/model.hpp"
#include "bcfl/record.hpp"

namespace bcfl {

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const noexcept { return tp + tn + fp + fn; }
  bool operator==(const ConfusionCounts&) const = default;
};

/// Predicts positive iff P(failure) >= threshold.
ConfusionCounts confusion(const ModelParams& params, std::span<const Record> data,
                          double threshold = 0.5);

/// A ratio whose denominator may be zero. Undefined ratios report 0.0.
struct Ratio {
  double value = 0.0;
  bool undefined = false;
};

Ratio accuracy(const ConfusionCounts& c);
Ratio precision(const ConfusionCounts& c);
Ratio recall(const ConfusionCounts& c);
/// Harmonic mean of precision and recall; undefined when either input is
/// undefined or both are zero.
Ratio f1_score(const ConfusionCounts& c);

struct ClassificationMetrics {
  Ratio accuracy;
  Ratio precision;
  Ratio recall;
  Ratio f1;

  /// "none", or the undefined metric names joined with '|'.
  std::string undefined_flags() const;
};

ClassificationMetrics summarize(const ConfusionCounts& c);

/// Euclidean distance between the positive-class and negative-class feature
/// means. Throws MissingClassError if either class is absent.
double centroid_distance(std::span<const Record> data);

}  // namespace bcfl
