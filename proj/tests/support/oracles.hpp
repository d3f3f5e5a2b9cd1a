#pragma once

// Reference implementations shared by the unit tests and the acceptance
// binary: brute-force oracles the production code is checked against.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "hiernav/controllers/dwa.hpp"
#include "hiernav/core/rng.hpp"
#include "hiernav/nn/layers.hpp"
#include "hiernav/world.hpp"

namespace hiernav::oracle {

inline std::vector<double> random_params(nn::Index n, std::uint64_t seed, double scale = 0.5) {
  CounterRng rng(seed, 11, 0);
  std::vector<double> p(static_cast<std::size_t>(n));
  for (auto& v : p) v = scale * rng.normal();
  return p;
}

inline nn::Mat<double> random_mat(nn::Index rows, nn::Index cols, std::uint64_t seed, double scale = 1.0) {
  CounterRng rng(seed, 12, 0);
  nn::Mat<double> m(rows, cols);
  for (nn::Index j = 0; j < cols; ++j)
    for (nn::Index i = 0; i < rows; ++i) m(i, j) = scale * rng.normal();
  return m;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); }

/// Worst relative error of `grad` against central differences (h = 1e-3) on
/// `probes` random coordinates.
inline double max_fd_error(std::vector<double> p, const std::vector<double>& grad,
                           const std::function<double(const std::vector<double>&)>& loss, int probes,
                           std::uint64_t seed) {
  CounterRng rng(seed, 13, 0);
  double worst = 0.0;
  for (int k = 0; k < probes; ++k) {
    const auto i = static_cast<std::size_t>(rng.below(p.size()));
    const double x = p[i];
    p[i] = x + 1e-3;
    const double up = loss(p);
    p[i] = x - 1e-3;
    const double down = loss(p);
    p[i] = x;
    worst = std::max(worst, rel_err(grad[i], (up - down) / 2e-3));
  }
  return worst;
}

/// O(T^2) GAE: A_t = sum_{k >= t} (gamma lambda)^{k-t} delta_k, truncated at
/// the first done at or after t.
inline std::vector<double> gae(const std::vector<double>& r, const std::vector<double>& v, const std::vector<char>& d,
                               double gamma, double lambda) {
  const std::size_t T = r.size();
  std::vector<double> a(T, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    double coef = 1.0;
    for (std::size_t k = t; k < T; ++k) {
      const double delta = r[k] + gamma * v[k + 1] * (d[k] ? 0.0 : 1.0) - v[k];
      a[t] += coef * delta;
      if (d[k]) break;
      coef *= gamma * lambda;
    }
  }
  return a;
}

/// Exhaustive DWA: evaluates every window sample against every object and
/// keeps the best under the documented ordering.
inline Command dwa_exhaustive(const controllers::DwaProblem& p, const controllers::DwaConfig& cfg) {
  std::vector<const controllers::DwaObject*> all;
  for (const auto& o : p.objects) all.push_back(&o);
  controllers::DwaCandidate best;
  for (const auto& u : controllers::dwa_window(p.robot, cfg)) {
    const auto c = controllers::dwa_evaluate(p, all, u, cfg);
    if (!c.admissible) continue;
    const bool better =
        !best.admissible || c.cost < best.cost ||
        (c.cost == best.cost && (c.u.v > best.u.v || (c.u.v == best.u.v && std::abs(c.u.w) < std::abs(best.u.w))));
    if (better) best = c;
  }
  return best.admissible ? best.u : Command{};
}

/// Random DWA query `index`: a generated scene with pedestrians advanced,
/// and a collision-free robot state with random heading and velocities.
/// Returns false when the drawn pose collides (caller skips it).
inline bool random_dwa_problem(std::uint64_t seed, controllers::DwaProblem& out) {
  Scene s = generate_scene(seed, static_cast<Difficulty>(seed % 3));
  CounterRng rng(seed, 77, 0);
  for (int k = 0; k < 300; ++k) advance_pedestrians(s);
  RobotState r;
  r.x = rng.uniform(1.0, 45.0);
  r.y = rng.uniform(0.4, 2.6);
  if (robot_collides(s, {r.x, r.y})) return false;
  r.theta = rng.uniform(-1.0, 1.0);
  r.v = rng.uniform(0.0, 1.0);
  r.omega = rng.uniform(-1.5, 1.5);
  out = controllers::dwa_problem(s, r);
  return true;
}

}  // namespace hiernav::oracle
