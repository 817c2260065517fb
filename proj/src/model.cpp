#include "bcfl/model.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <numeric>
#include <string>

#include "bcfl/errors.hpp"
#include "bcfl/rng.hpp"

namespace bcfl {

std::string_view to_string(ModelKind kind) { return kind == ModelKind::LR ? "lr" : "nn"; }

ModelKind model_kind_from_string(std::string_view name) {
  if (name == "lr") return ModelKind::LR;
  if (name == "nn") return ModelKind::NN;
  throw ContractViolation("unknown model kind '" + std::string(name) + "' (expected lr or nn)");
}

ModelParams::ModelParams(ModelKind kind, std::vector<double> values)
    : kind_(kind), values_(std::move(values)) {
  if (values_.size() != parameter_count(kind_)) {
    throw ContractViolation("parameter vector for " + std::string(to_string(kind_)) + " needs " +
                            std::to_string(parameter_count(kind_)) + " values, got " +
                            std::to_string(values_.size()));
  }
  for (double v : values_) {
    if (!std::isfinite(v)) throw ContractViolation("parameter value is not finite");
  }
}

ModelParams ModelParams::zeros(ModelKind kind) {
  return ModelParams(kind, std::vector<double>(parameter_count(kind), 0.0));
}

ModelParams ModelParams::initial(ModelKind kind, std::uint64_t seed) {
  if (kind == ModelKind::LR) return zeros(kind);

  using S = NetworkShape;
  std::vector<double> v(S::kSize, 0.0);
  Rng rng(seed);
  auto glorot = [&](std::size_t offset, std::size_t fan_out, std::size_t fan_in) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (std::size_t i = 0; i < fan_out * fan_in; ++i) v[offset + i] = rng.uniform(-limit, limit);
  };
  glorot(S::kW1, S::kHidden, S::kInput);
  glorot(S::kW2, S::kHidden, S::kHidden);
  glorot(S::kW3, S::kOutput, S::kHidden);
  return ModelParams(kind, std::move(v));
}

namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + e^z) without overflow.
double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

void require_features(std::span<const double> features) {
  if (features.size() != kFeatureCount) {
    throw ContractViolation("expected " + std::to_string(kFeatureCount) + " features, got " +
                            std::to_string(features.size()));
  }
  for (double f : features) {
    if (!std::isfinite(f)) throw ContractViolation("feature value is not finite");
  }
}

double lr_logit(const double* w, const double* x) {
  double z = 0.0;
  for (std::size_t i = 0; i < kFeatureCount; ++i) z += w[i] * x[i];
  return z;
}

struct NetActivations {
  std::array<double, NetworkShape::kHidden> z1, a1, z2, a2;
  std::array<double, NetworkShape::kOutput> logits, probs;
};

// out[o] = b[o] + sum_i W[o][i] * in[i]
void affine(const double* w, const double* b, const double* in, double* out, std::size_t n_out,
            std::size_t n_in) {
  for (std::size_t o = 0; o < n_out; ++o) {
    const double* row = w + o * n_in;
    double acc = b[o];
    for (std::size_t i = 0; i < n_in; ++i) acc += row[i] * in[i];
    out[o] = acc;
  }
}

void net_forward(const double* w, const double* x, NetActivations& act) {
  using S = NetworkShape;
  affine(w + S::kW1, w + S::kB1, x, act.z1.data(), S::kHidden, S::kInput);
  for (std::size_t h = 0; h < S::kHidden; ++h) act.a1[h] = std::max(act.z1[h], 0.0);
  affine(w + S::kW2, w + S::kB2, act.a1.data(), act.z2.data(), S::kHidden, S::kHidden);
  for (std::size_t h = 0; h < S::kHidden; ++h) act.a2[h] = std::max(act.z2[h], 0.0);
  affine(w + S::kW3, w + S::kB3, act.a2.data(), act.logits.data(), S::kOutput, S::kHidden);

  const double m = std::max(act.logits[0], act.logits[1]);
  const double e0 = std::exp(act.logits[0] - m);
  const double e1 = std::exp(act.logits[1] - m);
  const double sum = e0 + e1;
  act.probs = {e0 / sum, e1 / sum};
}

// Adds the per-record gradient of -log softmax(logits)[label] into grad and
// returns that loss.
double net_backward(const double* w, const Record& r, const NetActivations& act, double* grad) {
  using S = NetworkShape;
  const double m = std::max(act.logits[0], act.logits[1]);
  const double lse = m + std::log(std::exp(act.logits[0] - m) + std::exp(act.logits[1] - m));
  const double loss = lse - act.logits[static_cast<std::size_t>(r.label)];

  std::array<double, S::kOutput> dz3{act.probs[0], act.probs[1]};
  dz3[static_cast<std::size_t>(r.label)] -= 1.0;

  std::array<double, S::kHidden> da2{};
  for (std::size_t o = 0; o < S::kOutput; ++o) {
    double* gw = grad + S::kW3 + o * S::kHidden;
    const double* wr = w + S::kW3 + o * S::kHidden;
    for (std::size_t h = 0; h < S::kHidden; ++h) {
      gw[h] += dz3[o] * act.a2[h];
      da2[h] += wr[h] * dz3[o];
    }
    grad[S::kB3 + o] += dz3[o];
  }

  std::array<double, S::kHidden> dz2{};
  for (std::size_t h = 0; h < S::kHidden; ++h) dz2[h] = act.z2[h] > 0.0 ? da2[h] : 0.0;

  std::array<double, S::kHidden> da1{};
  for (std::size_t o = 0; o < S::kHidden; ++o) {
    const double d = dz2[o];
    if (d == 0.0) continue;
    double* gw = grad + S::kW2 + o * S::kHidden;
    const double* wr = w + S::kW2 + o * S::kHidden;
    for (std::size_t i = 0; i < S::kHidden; ++i) {
      gw[i] += d * act.a1[i];
      da1[i] += wr[i] * d;
    }
    grad[S::kB2 + o] += d;
  }

  for (std::size_t o = 0; o < S::kHidden; ++o) {
    if (act.z1[o] <= 0.0) continue;
    const double d = da1[o];
    double* gw = grad + S::kW1 + o * S::kInput;
    for (std::size_t i = 0; i < S::kInput; ++i) gw[i] += d * r.features[i];
    grad[S::kB1 + o] += d;
  }
  return loss;
}

// Sums per-record losses and gradients of data[indices[...]] into grad.
double accumulate(ModelKind kind, const double* w, std::span<const Record> data,
                  std::span<const std::size_t> indices, double* grad) {
  double loss = 0.0;
  if (kind == ModelKind::LR) {
    for (std::size_t idx : indices) {
      const Record& r = data[idx];
      const double* x = r.features.data();
      const double z = lr_logit(w, x);
      const double y = static_cast<double>(r.label);
      loss += softplus(z) - y * z;
      const double residual = sigmoid(z) - y;
      for (std::size_t i = 0; i < kFeatureCount; ++i) grad[i] += residual * x[i];
    }
  } else {
    NetActivations act;
    for (std::size_t idx : indices) {
      const Record& r = data[idx];
      net_forward(w, r.features.data(), act);
      loss += net_backward(w, r, act, grad);
    }
  }
  return loss;
}

void require_batch(std::span<const Record> batch) {
  if (batch.empty()) throw ContractViolation("batch must not be empty");
  for (const Record& r : batch) validate(r);
}

}  // namespace

std::vector<double> forward(const ModelParams& params, std::span<const double> features) {
  require_features(features);
  const double* w = params.values().data();
  if (params.kind() == ModelKind::LR) return {sigmoid(lr_logit(w, features.data()))};
  NetActivations act;
  net_forward(w, features.data(), act);
  return {act.probs[0], act.probs[1]};
}

double positive_probability(const ModelParams& params, std::span<const double> features) {
  const std::vector<double> p = forward(params, features);
  return p.back();
}

LossGradient loss_and_gradient(const ModelParams& params, std::span<const Record> batch) {
  require_batch(batch);
  std::vector<std::size_t> indices(batch.size());
  std::iota(indices.begin(), indices.end(), std::size_t{0});

  LossGradient out;
  out.gradient.assign(params.size(), 0.0);
  const double total =
      accumulate(params.kind(), params.values().data(), batch, indices, out.gradient.data());
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  out.loss = total * inv_n;
  for (double& g : out.gradient) g *= inv_n;
  return out;
}

ModelParams sgd_update(const ModelParams& params, std::span<const Record> data,
                       const SgdConfig& cfg) {
  if (data.empty()) throw ContractViolation("training data must not be empty");
  if (cfg.batch_size == 0) throw ContractViolation("batch size must be positive");
  if (cfg.batch_size > data.size()) {
    throw ContractViolation("batch size " + std::to_string(cfg.batch_size) +
                            " exceeds dataset size " + std::to_string(data.size()));
  }
  if (!(cfg.learning_rate >= 0.0) || !std::isfinite(cfg.learning_rate)) {
    throw ContractViolation("learning rate must be finite and non-negative");
  }
  if (cfg.epochs == 0) return params;
  for (const Record& r : data) validate(r);

  std::vector<double> w(params.values().begin(), params.values().end());
  std::vector<double> grad(w.size());
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(cfg.rng_seed);

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t len = std::min(cfg.batch_size, order.size() - start);
      std::fill(grad.begin(), grad.end(), 0.0);
      const double loss = accumulate(params.kind(), w.data(), data,
                                     std::span<const std::size_t>(order).subspan(start, len),
                                     grad.data());
      if (!std::isfinite(loss)) throw DivergenceError(epoch);
      const double step = cfg.learning_rate / static_cast<double>(len);
      for (std::size_t j = 0; j < w.size(); ++j) w[j] -= step * grad[j];
    }
  }

  for (double v : w) {
    if (!std::isfinite(v)) throw DivergenceError(cfg.epochs);
  }
  return ModelParams(params.kind(), std::move(w));
}

std::vector<std::uint8_t> serialize(const ModelParams& params) {
  std::vector<std::uint8_t> out;
  out.reserve(params.size() * 8);
  for (double v : params.values()) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int shift = 0; shift < 64; shift += 8) out.push_back(static_cast<std::uint8_t>(bits >> shift));
  }
  return out;
}

ModelParams deserialize(std::span<const std::uint8_t> bytes) {
  ModelKind kind;
  if (bytes.size() == serialized_size(ModelKind::LR)) {
    kind = ModelKind::LR;
  } else if (bytes.size() == serialized_size(ModelKind::NN)) {
    kind = ModelKind::NN;
  } else {
    throw DecodeError("model payload of " + std::to_string(bytes.size()) +
                      " bytes matches no model layout");
  }
  std::vector<double> values(parameter_count(kind));
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 7; b >= 0; --b) bits = (bits << 8) | bytes[i * 8 + static_cast<std::size_t>(b)];
    values[i] = std::bit_cast<double>(bits);
  }
  try {
    return ModelParams(kind, std::move(values));
  } catch (const ContractViolation& e) {
    throw DecodeError(e.what());
  }
}

}  // namespace bcfl
