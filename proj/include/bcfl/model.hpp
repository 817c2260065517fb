#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "bcfl/record.hpp"

namespace bcfl {

enum class ModelKind { LR, NN };

std::string_view to_string(ModelKind kind);
ModelKind model_kind_from_string(std::string_view name);

/// Layer widths of the failure-detection network.
struct NetworkShape {
  static constexpr std::size_t kInput = kFeatureCount;
  static constexpr std::size_t kHidden = 150;
  static constexpr std::size_t kOutput = 2;

  // Offsets into the flat parameter vector. Weight matrices are row-major
  // [out][in], each followed by its bias vector.
  static constexpr std::size_t kW1 = 0;
  static constexpr std::size_t kB1 = kW1 + kHidden * kInput;
  static constexpr std::size_t kW2 = kB1 + kHidden;
  static constexpr std::size_t kB2 = kW2 + kHidden * kHidden;
  static constexpr std::size_t kW3 = kB2 + kHidden;
  static constexpr std::size_t kB3 = kW3 + kOutput * kHidden;
  static constexpr std::size_t kSize = kB3 + kOutput;
};

static_assert(NetworkShape::kSize == 25802);

/// Number of parameters for a model kind (LR: 18 weights, no bias).
constexpr std::size_t parameter_count(ModelKind kind) {
  return kind == ModelKind::LR ? kFeatureCount : NetworkShape::kSize;
}

/// Flat parameter vector of either model. Length always matches the kind's
/// layout and every value is finite.
class ModelParams {
 public:
  ModelParams(ModelKind kind, std::vector<double> values);

  static ModelParams zeros(ModelKind kind);

  /// LR starts at zero. NN weights are Glorot-uniform, biases zero.
  static ModelParams initial(ModelKind kind, std::uint64_t seed);

  ModelKind kind() const noexcept { return kind_; }
  std::span<const double> values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }

  bool operator==(const ModelParams&) const = default;

 private:
  ModelKind kind_;
  std::vector<double> values_;
};

/// Class probabilities. LR yields {p}, the positive-class probability; NN yields
/// the softmax pair {P(normal), P(failure)}.
std::vector<double> forward(const ModelParams& params, std::span<const double> features);

/// P(label = 1) for either model kind.
double positive_probability(const ModelParams& params, std::span<const double> features);

struct LossGradient {
  double loss = 0.0;
  std::vector<double> gradient;
};

/// Mean cross-entropy over the batch and its gradient in parameter layout.
LossGradient loss_and_gradient(const ModelParams& params, std::span<const Record> batch);

struct SgdConfig {
  std::size_t batch_size = 32;
  std::size_t epochs = 40;
  double learning_rate = 0.005;
  std::uint64_t rng_seed = 0;
};

/// Minibatch SGD over `data`: each epoch shuffles the records and walks them in
/// batches of `batch_size` (the last batch may be short). Throws
/// DivergenceError on a non-finite loss.
ModelParams sgd_update(const ModelParams& params, std::span<const Record> data,
                       const SgdConfig& cfg);

/// Little-endian f64 payload in layout order; no header.
std::vector<std::uint8_t> serialize(const ModelParams& params);

/// The kind is recovered from the payload length; any other length is a
/// DecodeError.
ModelParams deserialize(std::span<const std::uint8_t> bytes);

/// Serialized payload size in bytes.
constexpr std::size_t serialized_size(ModelKind kind) { return parameter_count(kind) * 8; }

}  // namespace bcfl
