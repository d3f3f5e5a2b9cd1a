#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "hiernav/core/errors.hpp"

namespace hiernav::rl {

struct GaeResult {
  std::vector<double> advantages, returns;
};

/// Generalized advantage estimation over one worker's sequence. `values` has
/// one more entry than `rewards`: the bootstrap value after the last step.
/// A done at t cuts both the bootstrap and the advantage recursion.
inline GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values,
                             std::span<const char> dones, double gamma = 0.99, double lambda = 0.95) {
  const std::size_t T = rewards.size();
  if (values.size() != T + 1 || dones.size() != T)
    throw ConfigError("compute_gae: need T rewards, T dones and T+1 values");
  GaeResult g;
  g.advantages.assign(T, 0.0);
  g.returns.assign(T, 0.0);
  double next = 0.0;
  for (std::size_t t = T; t-- > 0;) {
    const double live = dones[t] ? 0.0 : 1.0;
    const double delta = rewards[t] + gamma * values[t + 1] * live - values[t];
    next = delta + gamma * lambda * live * next;
    g.advantages[t] = next;
    g.returns[t] = next + values[t];
  }
  return g;
}

}  // namespace hiernav::rl
