#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "hiernav/core/parallel.hpp"
#include "hiernav/eval/seeds.hpp"
#include "hiernav/hierarchy.hpp"

namespace hiernav::eval {

using NavFactory = std::function<std::unique_ptr<NavPolicy>()>;
using LowFactory = std::function<std::unique_ptr<LowLevel>()>;

struct NavSceneRow {
  std::uint64_t seed = 0;
  EpisodeState status = EpisodeState::Running;
  double travel_distance = 0.0;
  std::uint64_t ticks = 0;
  double wall_seconds = 0.0;  // timing only; kept out of the deterministic outputs
};

struct NavAggregate {
  std::size_t n = 0;
  double success_rate = 0.0;
  double mean_distance = 0.0;
  double std_distance = 0.0;  // population standard deviation
};

struct NavBenchmarkResult {
  std::string method;
  Difficulty difficulty = Difficulty::Easy;
  std::vector<NavSceneRow> rows;

  NavAggregate aggregate() const {
    NavAggregate a;
    a.n = rows.size();
    if (rows.empty()) return a;
    double sum = 0.0, succ = 0.0;
    for (const auto& r : rows) {
      sum += r.travel_distance;
      succ += r.status == EpisodeState::SuccessReachedGoal ? 1.0 : 0.0;
    }
    a.mean_distance = sum / a.n;
    a.success_rate = succ / a.n;
    double var = 0.0;
    for (const auto& r : rows) var += sq(r.travel_distance - a.mean_distance);
    a.std_distance = std::sqrt(var / a.n);
    return a;
  }
};

struct NavBenchmarkOptions {
  int workers = 1;
  EpisodeOptions episode;
  bool empty_corridor = false;  // strip obstacles and pedestrians (pipeline checks)
  // Optional sink for full trajectories, called with (scene index, result).
  std::function<void(std::size_t, const EpisodeResult&)> on_episode;
};

/// Runs one navigator / low-level pairing over an explicit scene list. Each
/// scene gets fresh policy instances, so results do not depend on ordering
/// or worker count.
inline NavBenchmarkResult run_nav_scenes(const std::string& method, Difficulty difficulty,
                                         std::span<const std::uint64_t> seeds, const NavFactory& make_nav,
                                         const LowFactory& make_low, const NavBenchmarkOptions& opt = {}) {
  // build once up front so arch/checkpoint problems surface before any episode
  make_nav();
  make_low();
  NavBenchmarkResult res;
  res.method = method;
  res.difficulty = difficulty;
  res.rows.resize(seeds.size());
  parallel_for(seeds.size(), opt.workers, [&](std::size_t i) {
    const auto start = std::chrono::steady_clock::now();
    auto nav = make_nav();
    auto low = make_low();
    EpisodeOptions eo = opt.episode;
    eo.keep_trajectory = eo.keep_trajectory && static_cast<bool>(opt.on_episode);
    Scene scene = generate_scene(seeds[i], difficulty);
    if (opt.empty_corridor) {
      scene.obstacles.clear();
      scene.pedestrians.clear();
    }
    auto r = run_episode(std::move(scene), *nav, *low, {}, eo);
    if (opt.empty_corridor && eo.keep_trajectory) r.trajectory.header["scene"]["empty"] = true;
    auto& row = res.rows[i];
    row.seed = seeds[i];
    row.status = r.status.state;
    row.travel_distance = r.status.travel_distance;
    row.ticks = r.status.ticks;
    row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (opt.on_episode) opt.on_episode(i, r);
  });
  return res;
}

/// The benchmark proper: the 50 canonical scenes of a difficulty.
inline NavBenchmarkResult run_nav_benchmark(const std::string& method, Difficulty difficulty, const NavFactory& make_nav,
                                            const LowFactory& make_low, const NavBenchmarkOptions& opt = {}) {
  return run_nav_scenes(method, difficulty, canonical_seeds(difficulty), make_nav, make_low, opt);
}

}  // namespace hiernav::eval
