#pragma once

#include <fstream>
#include <functional>
#include <iomanip>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hiernav/lowlevel.hpp"
#include "hiernav/nn/actor_critic.hpp"
#include "hiernav/rl/ppo.hpp"
#include "hiernav/rl/tracking_task.hpp"

namespace hiernav::rl {

/// PPO settings for the tracking task: short discount so the fall penalty
/// dominates the effective horizon, plus a KL early stop.
inline PpoConfig gait_ppo_defaults() {
  PpoConfig p;
  p.gamma = 0.8;
  p.lambda = 0.9;
  p.target_kl = 0.02;
  return p;
}

struct TrainGaitConfig {
  std::uint64_t seed = 1;
  long total_steps = 1'000'000;
  int envs = 16;
  int horizon = 256;
  int workers = 1;
  std::vector<Index> hidden{128, 128};
  double init_log_std = 0.0;
  bool anneal_lr = true;
  int eval_every = 10;  // updates between held-out evaluations
  int eval_episodes = 8;
  PpoConfig ppo = gait_ppo_defaults();
  nn::AdamHyper adam;
  TrackingTaskConfig task;

  nlohmann::json to_json() const {
    return {{"seed", seed},
            {"total_steps", total_steps},
            {"envs", envs},
            {"horizon", horizon},
            {"hidden", hidden},
            {"init_log_std", init_log_std},
            {"anneal_lr", anneal_lr},
            {"eval_every", eval_every},
            {"eval_episodes", eval_episodes},
            {"lr", adam.lr},
            {"ppo", ppo.to_json()},
            {"task", task.to_json()}};
  }

  // `workers` is a runtime knob and deliberately not part of the record:
  // results do not depend on it.
  static TrainGaitConfig from_json(const nlohmann::json& j) {
    TrainGaitConfig c;
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
    if (j.contains("task")) c.task = TrackingTaskConfig::from_json(j["task"]);
    if (c.envs < 1 || c.horizon < 1 || c.total_steps < 1) throw ConfigError("train-gait: envs, horizon and steps must be positive");
    return c;
  }
};

struct CurveRow {
  long step = 0;
  double train_return = 0.0;   // mean over episodes finished in this update
  double eval_return = 0.0;    // held-out schedules, deterministic policy
  double eval_rate = 0.0;      // held-out reward per survived tick
  double tracking_error = 0.0; // held-out mean |v - v_cmd|
  int eval_falls = 0;
};

struct TrainGaitResult {
  nn::PolicyParams best, last;
  std::vector<CurveRow> curve;
  double best_eval_rate = -1e300;
  long best_step = 0;
};

inline GaitEvaluation evaluate_gait_params(const nn::PolicyParams& params, const TrackingTaskConfig& task, int episodes) {
  LearnedGait low(params, task.plant);
  const auto seeds = held_out_schedule_seeds(episodes);
  return evaluate_tracking(low, task, seeds);
}

/// PPO on the tracking task. Keeps the parameters with the best held-out
/// reward per survived tick. Plain episode return would favour early falls:
/// per-tick penalties outweigh the alive bonus, so a quick -5 can beat a full
/// episode of decent tracking. Evaluation also runs after the final update.
inline TrainGaitResult train_gait(const TrainGaitConfig& cfg, const std::function<void(const CurveRow&)>& progress = {}) {
  const nn::ActorCritic net(
      nn::ActorCritic::make_arch(HistoryBuffer::feature_size, 2, cfg.hidden, cfg.hidden, cfg.init_log_std));
  TrainGaitResult res;
  nn::PolicyParams params = net.init(cfg.seed);
  std::vector<std::unique_ptr<Env>> envs;
  for (int e = 0; e < cfg.envs; ++e) envs.push_back(std::make_unique<TrackingEnv>(cfg.task));
  RolloutCollector collector(std::move(envs), HistoryBuffer::feature_size, 2, cfg.seed, cfg.workers);
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
    ppo_update(net, params, batch, cfg.ppo, adam, hyper, derive_key(cfg.seed, 0x9900 + static_cast<std::uint64_t>(u)));
    const bool last = u + 1 == updates;
    if ((u + 1) % cfg.eval_every == 0 || last) {
      const auto ev = evaluate_gait_params(params, cfg.task, cfg.eval_episodes);
      CurveRow row{(u + 1) * per_update, train_return, ev.mean_return, ev.reward_per_tick, ev.mean_abs_v_error,
                   ev.falls};
      res.curve.push_back(row);
      if (ev.reward_per_tick > res.best_eval_rate) {
        res.best_eval_rate = ev.reward_per_tick;
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

inline void write_curve_csv(const std::string& path, const std::vector<CurveRow>& curve) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  out << "step,train_return,eval_return,eval_rate,tracking_error,eval_falls\n";
  out << std::setprecision(9);
  for (const auto& r : curve)
    out << r.step << ',' << r.train_return << ',' << r.eval_return << ',' << r.eval_rate << ',' << r.tracking_error << ',' << r.eval_falls
        << '\n';
}

inline std::vector<CurveRow> read_curve_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read " + path);
  std::string line;
  std::getline(in, line);
  if (line != "step,train_return,eval_return,eval_rate,tracking_error,eval_falls") throw FormatError(path + ": not a training curve");
  std::vector<CurveRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream s(line);
    CurveRow r;
    char c;
    if (!(s >> r.step >> c >> r.train_return >> c >> r.eval_return >> c >> r.eval_rate >> c >> r.tracking_error >> c >> r.eval_falls))
      throw FormatError(path + ": bad row '" + line + "'");
    rows.push_back(r);
  }
  return rows;
}

}  // namespace hiernav::rl
