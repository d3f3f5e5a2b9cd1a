#pragma once

#include <fstream>
#include <functional>
#include <iomanip>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "hiernav/hierarchy.hpp"
#include "hiernav/il/demos.hpp"
#include "hiernav/nn/actor_critic.hpp"
#include "hiernav/rl/ppo.hpp"

namespace hiernav::rl {

/// Navigation-rate task for the hierarchical-RL baseline: the policy picks a
/// command every nav_period base ticks and is paid the forward progress.
struct HrlTaskConfig {
  std::vector<Difficulty> difficulties{Difficulty::Easy, Difficulty::Medium, Difficulty::Hard};
  int nav_period = 4;
  int limit_ticks = WorldConstants::episode_limit_ticks;
  double failure_penalty = 5.0;  // collision or fall
  bool empty_corridor = false;   // strip obstacles and pedestrians (sanity runs)

  nlohmann::json to_json() const {
    std::vector<std::string> d;
    for (auto x : difficulties) d.emplace_back(to_string(x));
    return {{"difficulties", d},
            {"nav_period", nav_period},
            {"limit_ticks", limit_ticks},
            {"failure_penalty", failure_penalty},
            {"empty_corridor", empty_corridor}};
  }
  static HrlTaskConfig from_json(const nlohmann::json& j) {
    HrlTaskConfig c;
    if (j.contains("difficulties")) {
      c.difficulties.clear();
      for (const auto& s : j["difficulties"]) c.difficulties.push_back(parse_difficulty(s.get<std::string>()));
    }
    c.nav_period = j.value("nav_period", c.nav_period);
    c.limit_ticks = j.value("limit_ticks", c.limit_ticks);
    c.failure_penalty = j.value("failure_penalty", c.failure_penalty);
    c.empty_corridor = j.value("empty_corridor", c.empty_corridor);
    if (c.difficulties.empty() || c.nav_period < 1 || c.limit_ticks < 1)
      throw ConfigError("hrl task: need at least one difficulty and positive nav_period/limit_ticks");
    return c;
  }
};

inline constexpr Index kHrlObsSize = il::kNavInputSize;

/// Policy input: ranges scaled to [0, 1], then heading, goal bearing, v, omega.
inline void hrl_features(const Observation& o, float* out) {
  il::observation_features(o, out);
  for (int i = 0; i < SensorConstants::beams; ++i) out[i] /= static_cast<float>(SensorConstants::max_range);
}

/// Policy output in [-1, 1]^2 (unclipped Gaussian draws are clipped by the
/// command box) mapped onto the command box.
inline Command hrl_command(float a0, float a1) {
  return Command{(static_cast<double>(a0) + 1.0) / 2.0, Command::w_max * static_cast<double>(a1)}.clipped();
}

using LowLevelMaker = std::function<std::unique_ptr<LowLevel>()>;

class NavEnv : public Env {
 public:
  NavEnv(HrlTaskConfig cfg, LowLevelMaker make_low) : cfg_(std::move(cfg)), low_(make_low()) {}

  void reset(std::uint64_t episode_seed) override {
    const auto d = cfg_.difficulties[episode_seed % cfg_.difficulties.size()];
    scene_ = generate_scene(derive_key(episode_seed, 0x47a) & 0x7fffffffu, d);
    if (cfg_.empty_corridor) {
      scene_.obstacles.clear();
      scene_.pedestrians.clear();
    }
    state_ = start_state(scene_);
    status_ = {};
    low_->reset(episode_seed_for(scene_));
  }

  void observe(std::span<float> out) override { hrl_features(hiernav::observe(scene_, state_), out.data()); }

  EnvStep step(std::span<const float> action) override {
    const Command u = hrl_command(action[0], action[1]);
    const double x0 = state_.x;
    for (int k = 0; k < cfg_.nav_period && !status_.terminal(); ++k) {
      const bool fell = low_->step(state_, u);
      status_ = step_world(scene_, state_, status_, cfg_.limit_ticks);
      if (fell && status_.state == EpisodeState::Running) status_.state = EpisodeState::FailFall;
    }
    EnvStep r;
    r.reward = state_.x - x0;
    if (status_.state == EpisodeState::FailCollision || status_.state == EpisodeState::FailFall)
      r.reward -= cfg_.failure_penalty;
    r.done = status_.terminal();
    r.truncated = status_.state == EpisodeState::FailTimeout;
    return r;
  }

  const EpisodeStatus& status() const { return status_; }

 private:
  HrlTaskConfig cfg_;
  std::unique_ptr<LowLevel> low_;
  Scene scene_;
  RobotState state_;
  EpisodeStatus status_;
};

/// Deployed hierarchical-RL navigator: Gaussian mean, no sampling.
class HrlNavigator : public NavPolicy {
 public:
  explicit HrlNavigator(nn::PolicyParams params) : net_(params.arch), params_(std::move(params)) {
    net_.check(params_);
    if (net_.obs_size() != kHrlObsSize || net_.act_size() != 2)
      throw ConfigError("hrl checkpoint expects obs " + std::to_string(net_.obs_size()) + "/act " +
                        std::to_string(net_.act_size()) + ", need " + std::to_string(kHrlObsSize) + "/2");
  }

  Command act(const NavContext& ctx) override {
    nn::Mat<float> x(kHrlObsSize, 1);
    hrl_features(ctx.obs, x.data());
    const auto mu = net_.mean<float>(params_.values, x);
    return hrl_command(mu(0, 0), mu(1, 0));
  }

  std::string name() const override { return "hrl"; }

 private:
  nn::ActorCritic net_;
  nn::PolicyParams params_;
};

inline PpoConfig hrl_ppo_defaults() {
  PpoConfig p;
  p.target_kl = 0.02;
  return p;
}

struct TrainHrlConfig {
  std::uint64_t seed = 1;
  long total_steps = 300'000;  // navigation steps
  int envs = 16;
  int horizon = 128;
  int workers = 1;
  std::vector<Index> hidden{64, 64};
  double init_log_std = -0.5;
  bool anneal_lr = true;
  int eval_every = 10;
  int eval_episodes = 8;
  PpoConfig ppo = hrl_ppo_defaults();
  nn::AdamHyper adam;
  HrlTaskConfig task;

  nlohmann::json to_json() const {
    return {{"seed", seed},           {"total_steps", total_steps}, {"envs", envs},
            {"horizon", horizon},     {"hidden", hidden},           {"init_log_std", init_log_std},
            {"anneal_lr", anneal_lr}, {"eval_every", eval_every},   {"eval_episodes", eval_episodes},
            {"lr", adam.lr},          {"ppo", ppo.to_json()},       {"task", task.to_json()}};
  }
  static TrainHrlConfig from_json(const nlohmann::json& j) {
    TrainHrlConfig c;
    c.seed = j.value("seed", c.seed);
    c.total_steps = j.value("total_steps", c.total_steps);
    c.envs = j.value("envs", c.envs);
    c.horizon = j.value("horizon", c.horizon);
    if (j.contains("hidden")) c.hidden = j["hidden"].get<std::vector<Index>>();
    c.init_log_std = j.value("init_log_std", c.init_log_std);
    c.anneal_lr = j.value("anneal_lr", c.anneal_lr);
    c.eval_every = j.value("eval_every", c.eval_every);
    c.eval_episodes = j.value("eval_episodes", c.eval_episodes);
    c.adam.lr = j.value("lr", c.adam.lr);
    if (j.contains("ppo")) {
      nlohmann::json merged = c.ppo.to_json();
      merged.update(j["ppo"]);
      c.ppo = PpoConfig::from_json(merged);
    }
    if (j.contains("task")) c.task = HrlTaskConfig::from_json(j["task"]);
    if (c.envs < 1 || c.horizon < 1 || c.total_steps < 1 || c.eval_every < 1 || c.eval_episodes < 1)
      throw ConfigError("train-nav hrl: envs, horizon, steps and eval settings must be positive");
    return c;
  }
};

struct HrlCurveRow {
  long step = 0;
  double train_return = 0.0;
  double eval_distance = 0.0;  // mean forward progress on held-out scenes
  double eval_success = 0.0;
};

struct TrainHrlResult {
  nn::PolicyParams best, last;
  std::vector<HrlCurveRow> curve;
  double best_eval_distance = -1e300;
  long best_step = 0;
};

struct HrlEvaluation {
  double mean_distance = 0.0;
  double success_rate = 0.0;
};

/// Deterministic-mean rollouts on held-out scenes (their own seed stream).
inline HrlEvaluation evaluate_hrl(const nn::PolicyParams& params, const HrlTaskConfig& task, const LowLevelMaker& make_low,
                                  int episodes) {
  HrlEvaluation ev;
  NavEnv env(task, make_low);
  const nn::ActorCritic net(params.arch);
  nn::Mat<float> x(kHrlObsSize, 1);
  for (int i = 0; i < episodes; ++i) {
    env.reset(derive_key(0x4e1d1u, static_cast<std::uint64_t>(i)));
    double progress = 0.0;
    for (;;) {
      env.observe(std::span<float>(x.data(), kHrlObsSize));
      const auto mu = net.mean<float>(params.values, x);
      const float a[2] = {mu(0, 0), mu(1, 0)};
      const auto r = env.step(a);
      progress += r.reward;
      if (r.done) break;
    }
    const auto& st = env.status();
    if (st.state == EpisodeState::FailCollision || st.state == EpisodeState::FailFall) progress += task.failure_penalty;
    ev.mean_distance += progress;
    ev.success_rate += st.state == EpisodeState::SuccessReachedGoal ? 1.0 : 0.0;
  }
  ev.mean_distance /= episodes;
  ev.success_rate /= episodes;
  return ev;
}

/// PPO over the navigation action space. Keeps the parameters with the best
/// held-out forward progress.
inline TrainHrlResult train_hrl_nav(const TrainHrlConfig& cfg, const LowLevelMaker& make_low,
                                    const std::function<void(const HrlCurveRow&)>& progress = {}) {
  const nn::ActorCritic net(nn::ActorCritic::make_arch(kHrlObsSize, 2, cfg.hidden, cfg.hidden, cfg.init_log_std));
  TrainHrlResult res;
  nn::PolicyParams params = net.init(cfg.seed);
  std::vector<std::unique_ptr<Env>> envs;
  for (int e = 0; e < cfg.envs; ++e) envs.push_back(std::make_unique<NavEnv>(cfg.task, make_low));
  RolloutCollector collector(std::move(envs), kHrlObsSize, 2, cfg.seed, cfg.workers);
  nn::AdamState adam;
  const long per_update = static_cast<long>(cfg.envs) * cfg.horizon;
  const long updates = std::max(1L, cfg.total_steps / per_update);
  double train_return = 0.0;
  for (long u = 0; u < updates; ++u) {
    auto batch = collector.collect(net, params, cfg.horizon, cfg.ppo);
    if (!batch.episode_returns.empty())
      train_return = std::accumulate(batch.episode_returns.begin(), batch.episode_returns.end(), 0.0) /
                     static_cast<double>(batch.episode_returns.size());
    nn::AdamHyper hyper = cfg.adam;
    if (cfg.anneal_lr) hyper.lr *= 1.0 - static_cast<double>(u) / static_cast<double>(updates);
    ppo_update(net, params, batch, cfg.ppo, adam, hyper, derive_key(cfg.seed, 0x4a00 + static_cast<std::uint64_t>(u)));
    if ((u + 1) % cfg.eval_every == 0 || u + 1 == updates) {
      const auto ev = evaluate_hrl(params, cfg.task, make_low, cfg.eval_episodes);
      HrlCurveRow row{(u + 1) * per_update, train_return, ev.mean_distance, ev.success_rate};
      res.curve.push_back(row);
      if (ev.mean_distance > res.best_eval_distance) {
        res.best_eval_distance = ev.mean_distance;
        res.best = params;
        res.best_step = row.step;
      }
      if (progress) progress(row);
    }
  }
  res.last = params;
  res.best.arch = res.last.arch = net.arch();
  return res;
}

inline void write_hrl_curve_csv(const std::string& path, const std::vector<HrlCurveRow>& curve) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  out << "step,train_return,eval_distance,eval_success\n" << std::setprecision(17);
  for (const auto& r : curve) out << r.step << ',' << r.train_return << ',' << r.eval_distance << ',' << r.eval_success << '\n';
}

}  // namespace hiernav::rl
