#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "hiernav/core/math.hpp"
#include "hiernav/hierarchy.hpp"
#include "hiernav/plant.hpp"

namespace hiernav::controllers {

struct MpcConfig {
  int horizon = 10;  // ticks
  int iterations = 200;
  double step = 0.1;
  double q_v = 50.0;
  double q_w = 12.0;
  double r = 0.5;
  double tolerance = 1e-4;
  double dt = kTickDt;
};

/// Nominal plant used for prediction: gains 1, damping 1/s, no latency, no slip.
struct NominalModel {
  double force_v = PlantLimits::force_v;
  double force_w = PlantLimits::force_w;
  double damp_v = 1.0;
  double damp_w = 1.0;
};

/// Receding-horizon tracker on the linearized nominal plant. The two channels
/// decouple, so each is a box-constrained QP in `horizon` variables, solved by
/// projected gradient with a warm start from the previous solution.
class MpcLite {
 public:
  explicit MpcLite(MpcConfig cfg = {}, NominalModel model = {}) : cfg_(cfg), model_(model) { reset(); }

  void reset() {
    warm_[0].assign(cfg_.horizon, 0.0);
    warm_[1].assign(cfg_.horizon, 0.0);
    unconverged_ = 0;
  }

  struct Channel {
    double alpha, beta, q, x0, target;
  };

  /// Objective of one channel: sum_k q (x_k - target)^2 + r a_{k-1}^2, k = 1..N.
  double objective(const Channel& c, const std::vector<double>& a) const {
    double x = c.x0, j = 0.0;
    for (double ak : a) {
      x = c.alpha * x + c.beta * ak;
      j += c.q * sq(x - c.target) + cfg_.r * ak * ak;
    }
    return j;
  }

  void gradient(const Channel& c, const std::vector<double>& a, std::vector<double>& g) const {
    const int n = static_cast<int>(a.size());
    std::vector<double> x(n);
    double xi = c.x0;
    for (int k = 0; k < n; ++k) x[k] = xi = c.alpha * xi + c.beta * a[k];
    g.assign(n, 0.0);
    double lambda = 0.0;  // d J / d x_{k+1}
    for (int k = n - 1; k >= 0; --k) {
      lambda = 2.0 * c.q * (x[k] - c.target) + (k + 1 < n ? c.alpha * lambda : 0.0);
      g[k] = c.beta * lambda + 2.0 * cfg_.r * a[k];
    }
  }

  /// Projected gradient descent from `a` (modified in place). Returns the
  /// final projected-gradient residual; `trace` receives the objective after
  /// every iteration when non-null.
  double solve(const Channel& c, std::vector<double>& a, std::vector<double>* trace = nullptr) const {
    std::vector<double> g, best = a;
    double best_j = objective(c, a);
    double residual = 0.0;
    for (int it = 0; it < cfg_.iterations; ++it) {
      gradient(c, a, g);
      residual = 0.0;
      for (std::size_t k = 0; k < a.size(); ++k) {
        const double next = clip(a[k] - cfg_.step * g[k], -1.0, 1.0);
        residual = std::max(residual, std::abs(next - a[k]) / cfg_.step);
        a[k] = next;
      }
      const double j = objective(c, a);
      if (trace) trace->push_back(j);
      if (j <= best_j) {
        best_j = j;
        best = a;
      }
      if (residual < cfg_.tolerance) break;
    }
    a = best;
    return residual;
  }

  Channel channel(int i, const RobotState& s, const Command& u) const {
    const double dt = cfg_.dt;
    if (i == 0) return {1.0 - model_.damp_v * dt, model_.force_v * dt, cfg_.q_v, s.v, u.v};
    return {1.0 - model_.damp_w * dt, model_.force_w * dt, cfg_.q_w, s.omega, u.w};
  }

  GaitAction act(const RobotState& s, const Command& u) {
    std::array<double, 2> first{};
    for (int i = 0; i < 2; ++i) {
      auto& a = warm_[i];
      const Channel c = channel(i, s, u);
      if (solve(c, a) > cfg_.tolerance) ++unconverged_;
      first[i] = a.front();
      // shift for the next warm start
      for (std::size_t k = 0; k + 1 < a.size(); ++k) a[k] = a[k + 1];
    }
    return {first[0], first[1]};
  }

  const MpcConfig& config() const { return cfg_; }
  int unconverged() const { return unconverged_; }

 private:
  MpcConfig cfg_;
  NominalModel model_;
  std::array<std::vector<double>, 2> warm_;
  int unconverged_ = 0;
};

}  // namespace hiernav::controllers
