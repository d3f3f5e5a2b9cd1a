#pragma once

#include <cmath>
#include <span>
#include <vector>

#include <json.hpp>

#include "hiernav/hierarchy.hpp"
#include "hiernav/lowlevel.hpp"
#include "hiernav/rl/ppo.hpp"
#include "hiernav/rl/reward.hpp"

namespace hiernav::rl {

struct TrackingTaskConfig {
  double episode_seconds = 20.0;
  double dwell_min = 1.0;  // command held for U[dwell_min, dwell_max] seconds
  double dwell_max = 3.0;
  // share of pieces drawn from the gentle sub-box |w| <= gentle_w; 0 keeps
  // every piece uniform over the full command box
  double gentle_fraction = 0.0;
  double gentle_w = 0.5;
  // share of pieces commanding the top speed v_max, where navigators cruise
  double top_speed_fraction = 0.0;
  PlantMode plant;
  GaitRewardWeights reward;

  int limit_ticks() const { return static_cast<int>(std::lround(episode_seconds * kTickHz)); }

  nlohmann::json to_json() const {
    return {{"episode_seconds", episode_seconds},
            {"dwell_min", dwell_min},
            {"dwell_max", dwell_max},
            {"gentle_fraction", gentle_fraction},
            {"gentle_w", gentle_w},
            {"top_speed_fraction", top_speed_fraction},
            {"plant", plant.to_json()}};
  }
  static TrackingTaskConfig from_json(const nlohmann::json& j) {
    TrackingTaskConfig c;
    c.episode_seconds = j.value("episode_seconds", c.episode_seconds);
    c.dwell_min = j.value("dwell_min", c.dwell_min);
    c.dwell_max = j.value("dwell_max", c.dwell_max);
    c.gentle_fraction = j.value("gentle_fraction", c.gentle_fraction);
    c.gentle_w = j.value("gentle_w", c.gentle_w);
    c.top_speed_fraction = j.value("top_speed_fraction", c.top_speed_fraction);
    if (j.contains("plant")) c.plant = PlantMode::from_json(j["plant"]);
    return c;
  }
};

/// Piecewise-constant command source: uniform draws from the command box
/// (optional shares from its gentle-turn slice and at top speed), each held
/// for a uniform dwell.
class CommandSchedule {
 public:
  CommandSchedule() = default;
  CommandSchedule(std::uint64_t seed, double duration, double dwell_min, double dwell_max,
                  double gentle_fraction = 0.0, double gentle_w = Command::w_max, double top_speed_fraction = 0.0) {
    CounterRng rng(seed, 0xc0d, 0);
    for (double t = 0.0; t < duration; t += rng.uniform(dwell_min, dwell_max)) {
      double v = rng.uniform(Command::v_min, Command::v_max);
      if (top_speed_fraction > 0.0 && rng.uniform() < top_speed_fraction) v = Command::v_max;
      double w_max = Command::w_max;
      if (gentle_fraction > 0.0 && rng.uniform() < gentle_fraction) w_max = std::min(gentle_w, Command::w_max);
      pieces_.push_back({t, Command{v, rng.uniform(-w_max, w_max)}.clipped()});
    }
  }
  CommandSchedule(std::uint64_t seed, const TrackingTaskConfig& cfg)
      : CommandSchedule(seed, cfg.episode_seconds, cfg.dwell_min, cfg.dwell_max, cfg.gentle_fraction, cfg.gentle_w,
                        cfg.top_speed_fraction) {}

  Command at(double t) const {
    Command u;
    for (const auto& [start, c] : pieces_) {
      if (start > t) break;
      u = c;
    }
    return u;
  }

  std::size_t pieces() const { return pieces_.size(); }

 private:
  std::vector<std::pair<double, Command>> pieces_;
};

/// Command-tracking episodes on the gait plant. Observation and step order
/// mirror PlantLowLevel::step, so a trained policy sees at deployment exactly
/// what it saw in training.
class TrackingEnv : public Env {
 public:
  explicit TrackingEnv(TrackingTaskConfig cfg) : cfg_(std::move(cfg)) {}

  void reset(std::uint64_t episode_seed) override {
    plant_ = Plant(cfg_.plant.extrinsics(episode_seed));
    schedule_ = CommandSchedule(episode_seed, cfg_);
    state_ = {};
    history_.clear();
    last_ = {};
    tick_ = 0;
    observed_ = false;
  }

  void observe(std::span<float> out) override {
    if (!observed_) {
      u_ = schedule_.at(tick_ * kTickDt);
      history_.push(u_, state_, last_);
      observed_ = true;
    }
    history_.flatten<float>(out);
  }

  EnvStep step(std::span<const float> action) override {
    if (!observed_) {
      std::vector<float> scratch(HistoryBuffer::feature_size);
      observe(scratch);
    }
    last_ = GaitAction{action[0], action[1]}.clipped();
    const bool fell = plant_.step(state_, last_);
    ++tick_;
    observed_ = false;
    EnvStep r;
    r.reward = gait_reward(state_, u_, last_, fell, cfg_.reward);
    const bool timeout = tick_ >= cfg_.limit_ticks();
    r.done = fell || timeout;
    r.truncated = timeout && !fell;
    return r;
  }

  const RobotState& state() const { return state_; }

 private:
  TrackingTaskConfig cfg_;
  Plant plant_;
  CommandSchedule schedule_;
  RobotState state_;
  HistoryBuffer history_;
  GaitAction last_;
  Command u_;
  int tick_ = 0;
  bool observed_ = false;
};

struct GaitEvaluation {
  double mean_return = 0.0;
  double reward_per_tick = 0.0;  // total reward over total ticks survived
  double mean_abs_v_error = 0.0;  // |v - v_cmd| averaged over all ticks
  double mean_abs_w_error = 0.0;
  int falls = 0;
  int episodes = 0;
};

/// Schedules never used for training: their seeds come from a separate key.
inline std::vector<std::uint64_t> held_out_schedule_seeds(int n) {
  std::vector<std::uint64_t> s;
  for (int i = 0; i < n; ++i) s.push_back(derive_key(0x4e1d0u, static_cast<std::uint64_t>(i)));
  return s;
}

/// Runs a deployed low level (not the training env) on the given schedules.
inline GaitEvaluation evaluate_tracking(LowLevel& low, const TrackingTaskConfig& cfg,
                                        std::span<const std::uint64_t> seeds) {
  GaitEvaluation ev;
  long ticks = 0;
  for (auto seed : seeds) {
    low.reset(seed);
    const CommandSchedule schedule(seed, cfg);
    RobotState s;
    double ret = 0.0;
    for (int k = 0; k < cfg.limit_ticks(); ++k) {
      const Command u = schedule.at(k * kTickDt);
      const bool fell = low.step(s, u);
      ret += gait_reward(s, u, low.last_action(), fell, cfg.reward);
      ev.mean_abs_v_error += std::abs(s.v - u.v);
      ev.mean_abs_w_error += std::abs(s.omega - u.w);
      ++ticks;
      if (fell) {
        ++ev.falls;
        break;
      }
    }
    ev.mean_return += ret;
    ++ev.episodes;
  }
  if (ev.episodes > 0) ev.mean_return /= ev.episodes;
  if (ticks > 0) {
    ev.reward_per_tick = ev.mean_return * ev.episodes / static_cast<double>(ticks);
    ev.mean_abs_v_error /= static_cast<double>(ticks);
    ev.mean_abs_w_error /= static_cast<double>(ticks);
  }
  return ev;
}

}  // namespace hiernav::rl
