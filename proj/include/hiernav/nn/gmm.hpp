#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "hiernav/core/rng.hpp"
#include "hiernav/nn/layers.hpp"

namespace hiernav::nn {

inline double softplus(double s) { return std::max(s, 0.0) + std::log1p(std::exp(-std::abs(s))); }
inline double sigmoid_scalar(double s) { return 1.0 / (1.0 + std::exp(-s)); }
inline double softplus_inverse(double y) { return y > 20.0 ? y : std::log(std::expm1(y)); }

/// Gaussian-mixture head over a 2D command. Raw layout per column (5K rows):
/// [weight logits | mean_0 pre-squash | mean_1 | std_0 pre-softplus | std_1].
/// Means are squashed into [lo, hi] with tanh; std = min_std + softplus(raw).
struct GmmSpec {
  int components = 5;
  std::array<double, 2> lo{0.0, -1.5};
  std::array<double, 2> hi{1.0, 1.5};
  double min_std = 1e-3;

  Index raw_size() const { return 5 * components; }
};

struct GmmComponent {
  double weight = 0.0;
  std::array<double, 2> mean{};
  std::array<double, 2> stddev{};
};

template <class S>
std::vector<GmmComponent> gmm_decode(const GmmSpec& spec, const S* raw) {
  const int K = spec.components;
  std::vector<GmmComponent> out(K);
  double mx = -1e300;
  for (int k = 0; k < K; ++k) mx = std::max(mx, static_cast<double>(raw[k]));
  double z = 0.0;
  for (int k = 0; k < K; ++k) z += std::exp(static_cast<double>(raw[k]) - mx);
  for (int k = 0; k < K; ++k) {
    out[k].weight = std::exp(static_cast<double>(raw[k]) - mx) / z;
    for (int d = 0; d < 2; ++d) {
      const double c = 0.5 * (spec.lo[d] + spec.hi[d]);
      const double h = 0.5 * (spec.hi[d] - spec.lo[d]);
      out[k].mean[d] = c + h * std::tanh(static_cast<double>(raw[(1 + d) * K + k]));
      out[k].stddev[d] = spec.min_std + softplus(static_cast<double>(raw[(3 + d) * K + k]));
    }
  }
  return out;
}

/// -log sum_k w_k N(target; mu_k, diag sigma_k^2), in log-space. If `draw`
/// is non-null, writes d(scale * NLL)/d(raw) into it.
template <class S>
double gmm_nll(const GmmSpec& spec, const S* raw, const std::array<double, 2>& target, S* draw = nullptr,
               double scale = 1.0) {
  const int K = spec.components;
  constexpr double half_log_2pi = 0.91893853320467274178;
  const auto comps = gmm_decode(spec, raw);
  std::vector<double> logp(K);
  double mx = -1e300;
  for (int k = 0; k < K; ++k) {
    double lp = std::log(std::max(comps[k].weight, 1e-300));
    for (int d = 0; d < 2; ++d) {
      const double zd = (target[d] - comps[k].mean[d]) / comps[k].stddev[d];
      lp += -0.5 * zd * zd - std::log(comps[k].stddev[d]) - half_log_2pi;
    }
    logp[k] = lp;
    mx = std::max(mx, lp);
  }
  double sum = 0.0;
  for (int k = 0; k < K; ++k) sum += std::exp(logp[k] - mx);
  const double lse = mx + std::log(sum);
  if (draw) {
    for (int k = 0; k < K; ++k) {
      const double resp = std::exp(logp[k] - lse);
      draw[k] = static_cast<S>(scale * (comps[k].weight - resp));
      for (int d = 0; d < 2; ++d) {
        const double h = 0.5 * (spec.hi[d] - spec.lo[d]);
        const double sd = comps[k].stddev[d];
        const double diff = target[d] - comps[k].mean[d];
        const double t = std::tanh(static_cast<double>(raw[(1 + d) * K + k]));
        const double dmu = -resp * diff / (sd * sd);
        draw[(1 + d) * K + k] = static_cast<S>(scale * dmu * h * (1.0 - t * t));
        const double dsd = -resp * (diff * diff / (sd * sd * sd) - 1.0 / sd);
        draw[(3 + d) * K + k] = static_cast<S>(scale * dsd * sigmoid_scalar(static_cast<double>(raw[(3 + d) * K + k])));
      }
    }
  }
  return -lse;
}

/// Picks a command from the mixture. temperature == 0 returns the mean of the
/// highest-weight component; otherwise samples a component and a Gaussian
/// draw with std scaled by the temperature.
template <class S>
std::array<double, 2> gmm_sample(const GmmSpec& spec, const S* raw, double temperature, CounterRng* rng) {
  const auto comps = gmm_decode(spec, raw);
  if (temperature <= 0.0 || rng == nullptr) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < comps.size(); ++k)
      if (comps[k].weight > comps[best].weight) best = k;
    return comps[best].mean;
  }
  double u = rng->uniform();
  std::size_t pick = comps.size() - 1;
  for (std::size_t k = 0; k < comps.size(); ++k) {
    if (u < comps[k].weight) {
      pick = k;
      break;
    }
    u -= comps[k].weight;
  }
  std::array<double, 2> out{};
  for (int d = 0; d < 2; ++d) out[d] = comps[pick].mean[d] + temperature * comps[pick].stddev[d] * rng->normal();
  return out;
}

}  // namespace hiernav::nn
