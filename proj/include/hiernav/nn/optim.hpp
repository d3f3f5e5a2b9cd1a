#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "hiernav/core/errors.hpp"

namespace hiernav::nn {

struct AdamHyper {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<double> m, v;
  long step = 0;
};

/// Adam with bias correction. Throws NumericalError naming the first
/// non-finite gradient index; parameters are untouched in that case.
template <class S>
void adam_step(std::span<S> params, std::span<const S> grads, AdamState& st, const AdamHyper& hp = {}) {
  if (params.size() != grads.size()) throw ConfigError("adam: parameter/gradient size mismatch");
  for (std::size_t i = 0; i < grads.size(); ++i)
    if (!std::isfinite(static_cast<double>(grads[i])))
      throw NumericalError("adam: non-finite gradient at parameter index " + std::to_string(i));
  if (st.m.size() != params.size()) {
    st.m.assign(params.size(), 0.0);
    st.v.assign(params.size(), 0.0);
    st.step = 0;
  }
  ++st.step;
  const double c1 = 1.0 - std::pow(hp.beta1, static_cast<double>(st.step));
  const double c2 = 1.0 - std::pow(hp.beta2, static_cast<double>(st.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = static_cast<double>(grads[i]);
    st.m[i] = hp.beta1 * st.m[i] + (1.0 - hp.beta1) * g;
    st.v[i] = hp.beta2 * st.v[i] + (1.0 - hp.beta2) * g * g;
    const double mhat = st.m[i] / c1;
    const double vhat = st.v[i] / c2;
    params[i] = static_cast<S>(static_cast<double>(params[i]) - hp.lr * mhat / (std::sqrt(vhat) + hp.eps));
  }
}

/// Scales grads so their global L2 norm is at most max_norm; returns the
/// pre-clip norm.
template <class S>
double clip_grad_norm(std::span<S> grads, double max_norm) {
  double ss = 0.0;
  for (auto g : grads) ss += static_cast<double>(g) * static_cast<double>(g);
  const double norm = std::sqrt(ss);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (auto& g : grads) g = static_cast<S>(static_cast<double>(g) * s);
  }
  return norm;
}

}  // namespace hiernav::nn
