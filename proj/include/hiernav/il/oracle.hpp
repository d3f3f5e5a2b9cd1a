#pragma once

#include <functional>
#include <memory>
#include <string>

#include "hiernav/controllers/dwa.hpp"
#include "hiernav/core/parallel.hpp"
#include "hiernav/hierarchy.hpp"
#include "hiernav/il/demos.hpp"

namespace hiernav::il {

struct OracleDemoOptions {
  int workers = 1;
  int min_attempts = 20;  // attempts before the success-rate guard applies
  double min_success = 0.1;
  int max_attempts = 0;   // 0: 20 * count
};

/// Scene seeds for demonstrations come from their own key, so they never
/// coincide with benchmark scenes by construction of the stream.
inline std::uint64_t demo_scene_seed(std::uint64_t seed, Difficulty d, std::uint64_t attempt) {
  return derive_key(derive_key(seed, 0xde70 + static_cast<std::uint64_t>(d)), attempt) & 0x7fffffffu;
}

/// Privileged DWA over `make_low` on generated scenes, recording
/// (observation, command) at the navigation rate. Only successful episodes
/// are kept; attempts continue until `count` successes. Throws if the
/// success rate is below `min_success` after `min_attempts`.
inline DemoDataset generate_oracle_demos(Difficulty difficulty, int count, std::uint64_t seed,
                                         const std::function<std::unique_ptr<LowLevel>()>& make_low,
                                         const OracleDemoOptions& opt = {}) {
  if (count < 1) throw ConfigError("gen-demos: count must be positive");
  DemoDataset ds;
  const int max_attempts = opt.max_attempts > 0 ? opt.max_attempts : 20 * count;
  int attempts = 0, successes = 0;
  // batches of attempts run in parallel, results are consumed in attempt order
  const int batch = std::max(1, opt.workers) * 2;
  while (successes < count) {
    if (attempts >= max_attempts) throw ConfigError("gen-demos: gave up after " + std::to_string(attempts) + " attempts");
    std::vector<DemoTrajectory> tries(static_cast<std::size_t>(batch));
    std::vector<EpisodeState> states(tries.size());
    parallel_for(tries.size(), opt.workers, [&](std::size_t i) {
      const auto scene_seed = demo_scene_seed(seed, difficulty, static_cast<std::uint64_t>(attempts) + i);
      controllers::DwaNavigator nav;
      auto low = make_low();
      DemoTrajectory tr;
      tr.source = DemoSource::DwaOracle;
      tr.scene_seed = scene_seed;
      tr.difficulty = difficulty;
      EpisodeOptions eo;
      eo.keep_trajectory = false;
      const auto r = run_episode(
          generate_scene(scene_seed, difficulty), nav, *low,
          [&](const Observation& o, const Command& u, double t) { tr.records.push_back({t, o, u}); }, eo);
      tr.status = std::string(to_string(r.status.state));
      states[i] = r.status.state;
      tries[i] = std::move(tr);
    });
    for (std::size_t i = 0; i < tries.size() && successes < count; ++i) {
      ++attempts;
      if (states[i] != EpisodeState::SuccessReachedGoal) continue;
      auto& tr = tries[i];
      char name[32];
      std::snprintf(name, sizeof name, "demo_%04d.jsonl", successes);
      tr.name = name;
      ds.trajectories.push_back(std::move(tr));
      ++successes;
    }
    if (attempts >= opt.min_attempts && successes < opt.min_success * attempts)
      throw ConfigError("gen-demos: DWA succeeded on " + std::to_string(successes) + "/" + std::to_string(attempts) +
                        " " + std::string(to_string(difficulty)) +
                        " scenes, below the 10% floor; the planner or gait has regressed");
  }
  return ds;
}

}  // namespace hiernav::il
