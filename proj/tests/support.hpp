#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "bcfl/model.hpp"
#include "bcfl/record.hpp"
#include "bcfl/rng.hpp"

namespace testutil {

inline bcfl::Record make_record(std::initializer_list<double> head, int label) {
  bcfl::Record r;
  std::size_t i = 0;
  for (double v : head) r.features[i++] = v;
  r.label = label;
  return r;
}

inline std::vector<bcfl::Record> random_records(bcfl::Rng& rng, std::size_t n, double scale = 1.0) {
  std::vector<bcfl::Record> out(n);
  for (auto& r : out) {
    for (double& f : r.features) f = scale * rng.normal();
    r.label = static_cast<int>(rng.index(2));
  }
  return out;
}

inline bcfl::ModelParams random_params(bcfl::Rng& rng, bcfl::ModelKind kind, double scale) {
  std::vector<double> v(bcfl::parameter_count(kind));
  for (double& x : v) x = rng.uniform(-scale, scale);
  return bcfl::ModelParams(kind, std::move(v));
}

// Plain long-double forward pass written out loop by loop, used as the
// finite-difference reference.
inline long double reference_loss(std::span<const double> w, bcfl::ModelKind kind,
                                  std::span<const bcfl::Record> batch) {
  using S = bcfl::NetworkShape;
  long double total = 0;
  for (const auto& r : batch) {
    if (kind == bcfl::ModelKind::LR) {
      long double z = 0;
      for (std::size_t i = 0; i < bcfl::kFeatureCount; ++i) z += (long double)w[i] * r.features[i];
      // -log sigmoid(z) for label 1, -log(1 - sigmoid(z)) for label 0
      const long double s = r.label == 1 ? -z : z;
      total += s > 0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s));
      continue;
    }
    std::vector<long double> h1(S::kHidden), h2(S::kHidden);
    for (std::size_t j = 0; j < S::kHidden; ++j) {
      long double a = w[S::kB1 + j];
      for (std::size_t i = 0; i < S::kInput; ++i) a += (long double)w[S::kW1 + j * S::kInput + i] * r.features[i];
      h1[j] = a > 0 ? a : 0;
    }
    for (std::size_t j = 0; j < S::kHidden; ++j) {
      long double a = w[S::kB2 + j];
      for (std::size_t i = 0; i < S::kHidden; ++i) a += (long double)w[S::kW2 + j * S::kHidden + i] * h1[i];
      h2[j] = a > 0 ? a : 0;
    }
    long double logit[2];
    for (std::size_t j = 0; j < 2; ++j) {
      long double a = w[S::kB3 + j];
      for (std::size_t i = 0; i < S::kHidden; ++i) a += (long double)w[S::kW3 + j * S::kHidden + i] * h2[i];
      logit[j] = a;
    }
    const long double m = std::max(logit[0], logit[1]);
    const long double lse = m + std::log(std::exp(logit[0] - m) + std::exp(logit[1] - m));
    total += lse - logit[r.label];
  }
  return total / (long double)batch.size();
}

struct GradientCheck {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;
};

// Central differences of reference_loss against the analytic gradient on the
// given components. Components where the one-sided slopes disagree sit on a
// ReLU kink and are skipped.
inline GradientCheck check_gradient(const bcfl::ModelParams& params, std::span<const bcfl::Record> batch,
                                    std::span<const std::size_t> components, double eps = 1e-5) {
  const auto analytic = bcfl::loss_and_gradient(params, batch).gradient;
  std::vector<double> w(params.values().begin(), params.values().end());
  const long double f0 = reference_loss(w, params.kind(), batch);
  GradientCheck out;
  for (std::size_t c : components) {
    const double orig = w[c];
    w[c] = orig + eps;
    const long double fp = reference_loss(w, params.kind(), batch);
    w[c] = orig - eps;
    const long double fm = reference_loss(w, params.kind(), batch);
    w[c] = orig;
    const long double fwd = (fp - f0) / eps, bwd = (f0 - fm) / eps;
    const double fd = static_cast<double>((fp - fm) / (2 * eps));
    if (std::fabs(static_cast<double>(fwd - bwd)) > 1e-3 * std::max(std::fabs(fd), 1e-3)) {
      ++out.skipped_kinks;
      continue;
    }
    const double denom = std::max({std::fabs(analytic[c]), std::fabs(fd), 1e-6});
    out.max_rel_error = std::max(out.max_rel_error, std::fabs(analytic[c] - fd) / denom);
    ++out.checked;
  }
  return out;
}

// A handful of components from every parameter block of the layout.
inline std::vector<std::size_t> sample_components(bcfl::Rng& rng, bcfl::ModelKind kind, std::size_t per_block) {
  using S = bcfl::NetworkShape;
  std::vector<std::size_t> out;
  if (kind == bcfl::ModelKind::LR) {
    for (std::size_t i = 0; i < bcfl::kFeatureCount; ++i) out.push_back(i);
    return out;
  }
  const std::size_t bounds[] = {S::kW1, S::kB1, S::kW2, S::kB2, S::kW3, S::kB3, S::kSize};
  for (std::size_t b = 0; b + 1 < std::size(bounds); ++b) {
    for (std::size_t k = 0; k < per_block; ++k) out.push_back(bounds[b] + rng.index(bounds[b + 1] - bounds[b]));
  }
  return out;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("bcfl_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testutil
