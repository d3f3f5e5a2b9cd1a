#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hiernav/core/parallel.hpp"
#include "hiernav/core/rng.hpp"
#include "hiernav/nn/actor_critic.hpp"
#include "hiernav/nn/optim.hpp"
#include "hiernav/rl/gae.hpp"

namespace hiernav::rl {

using nn::Index;
using nn::Mat;

struct PpoConfig {
  double clip = 0.2;
  int epochs = 10;
  int minibatches = 8;
  double entropy_coef = 0.005;
  double value_coef = 0.5;
  double max_grad_norm = 0.5;
  double gamma = 0.99;
  double lambda = 0.95;
  bool normalize_advantages = true;
  double target_kl = 0.0;  // stop the epoch loop once approx-KL exceeds this; 0 disables

  nlohmann::json to_json() const {
    return {{"clip", clip},
            {"epochs", epochs},
            {"minibatches", minibatches},
            {"entropy_coef", entropy_coef},
            {"value_coef", value_coef},
            {"max_grad_norm", max_grad_norm},
            {"gamma", gamma},
            {"lambda", lambda},
            {"normalize_advantages", normalize_advantages},
            {"target_kl", target_kl}};
  }
  static PpoConfig from_json(const nlohmann::json& j) {
    PpoConfig c;
    c.clip = j.value("clip", c.clip);
    c.epochs = j.value("epochs", c.epochs);
    c.minibatches = j.value("minibatches", c.minibatches);
    c.entropy_coef = j.value("entropy_coef", c.entropy_coef);
    c.value_coef = j.value("value_coef", c.value_coef);
    c.max_grad_norm = j.value("max_grad_norm", c.max_grad_norm);
    c.gamma = j.value("gamma", c.gamma);
    c.lambda = j.value("lambda", c.lambda);
    c.normalize_advantages = j.value("normalize_advantages", c.normalize_advantages);
    c.target_kl = j.value("target_kl", c.target_kl);
    return c;
  }
};

/// Flat rollout storage; column i belongs to worker i / horizon, step i % horizon.
struct RolloutBatch {
  Mat<float> obs, actions;
  std::vector<double> logp, values, rewards, advantages, returns;
  std::vector<char> dones;
  std::vector<double> episode_returns;  // episodes that finished during collection

  Index size() const { return obs.cols(); }
};

struct PpoLoss {
  double policy = 0.0, value = 0.0, entropy = 0.0, approx_kl = 0.0, clip_fraction = 0.0, total = 0.0;
};

/// Diagonal Gaussian log-density of `a` under mean `mu` and log-stds.
template <class S>
double gaussian_logp(const S* a, const S* mu, std::span<const double> log_std) {
  double lp = 0.0;
  for (std::size_t i = 0; i < log_std.size(); ++i) {
    const double z = (static_cast<double>(a[i]) - static_cast<double>(mu[i])) / std::exp(log_std[i]);
    lp += -0.5 * z * z - log_std[i] - nn::kHalfLog2Pi;
  }
  return lp;
}

/// Clipped-surrogate PPO loss over the given columns. Adds the gradient into
/// `grad` when non-empty. Samples whose ratio left the clip band in the
/// direction of their advantage contribute no policy gradient.
template <class S>
PpoLoss ppo_loss(const nn::ActorCritic& net, std::span<const S> p, const Mat<S>& obs, const Mat<S>& act,
                 std::span<const double> old_logp, std::span<const double> adv, std::span<const double> ret,
                 const PpoConfig& cfg, std::span<S> grad = {}) {
  const Index n = obs.cols(), A = net.act_size();
  const bool want = !grad.empty();
  nn::MlpCache<S> pc, vc;
  const Mat<S> mu = net.mean<S>(p, obs, want ? &pc : nullptr);
  const Mat<S> v = net.value<S>(p, obs, want ? &vc : nullptr);
  std::vector<double> ls(static_cast<std::size_t>(A));
  for (Index i = 0; i < A; ++i) ls[i] = static_cast<double>(net.log_std<S>(p, i));

  PpoLoss L;
  Mat<S> dmu = Mat<S>::Zero(A, n);
  std::vector<double> dls(static_cast<std::size_t>(A), 0.0);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (Index j = 0; j < n; ++j) {
    const double lp = gaussian_logp<S>(act.col(j).data(), mu.col(j).data(), ls);
    const double ratio = std::exp(lp - old_logp[j]);
    const double a = adv[j];
    const double clipped = std::clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip);
    L.policy -= std::min(ratio * a, clipped * a) * inv_n;
    L.approx_kl += (old_logp[j] - lp) * inv_n;
    if (std::abs(ratio - 1.0) > cfg.clip) L.clip_fraction += inv_n;
    const bool cut = (a > 0.0 && ratio > 1.0 + cfg.clip) || (a < 0.0 && ratio < 1.0 - cfg.clip);
    if (want && !cut) {
      const double dlp = -a * ratio * inv_n;
      for (Index i = 0; i < A; ++i) {
        const double sd = std::exp(ls[i]);
        const double z = (static_cast<double>(act(i, j)) - static_cast<double>(mu(i, j))) / sd;
        dmu(i, j) = static_cast<S>(dlp * z / sd);
        dls[i] += dlp * (z * z - 1.0);
      }
    }
    const double err = static_cast<double>(v(0, j)) - ret[j];
    L.value += err * err * inv_n;
  }
  for (Index i = 0; i < A; ++i) L.entropy += ls[i] + 0.5 + nn::kHalfLog2Pi;
  L.total = L.policy + cfg.value_coef * L.value - cfg.entropy_coef * L.entropy;
  if (!want || !std::isfinite(L.total)) return L;

  nn::mlp_backward<S>(p, grad, net.policy_layout(), pc, dmu);
  Mat<S> dv(1, n);
  for (Index j = 0; j < n; ++j)
    dv(0, j) = static_cast<S>(2.0 * cfg.value_coef * (static_cast<double>(v(0, j)) - ret[j]) * inv_n);
  nn::mlp_backward<S>(p, grad, net.value_layout(), vc, dv);
  for (Index i = 0; i < A; ++i) grad[net.log_std_offset() + i] += static_cast<S>(dls[i] - cfg.entropy_coef);
  return L;
}

struct PpoMetrics {
  double policy_loss = 0.0, value_loss = 0.0, entropy = 0.0, approx_kl = 0.0, clip_fraction = 0.0;
  double grad_norm = 0.0;
  int skipped = 0;  // minibatches dropped for a non-finite loss
  int minibatches = 0;
  int epochs = 0;   // epochs run before any KL early stop
};

/// Normalizes advantages in place to zero mean and unit (population) std.
inline void normalize(std::vector<double>& x) {
  if (x.empty()) return;
  const double m = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
  double v = 0.0;
  for (double a : x) v += (a - m) * (a - m);
  const double sd = std::sqrt(v / x.size());
  for (double& a : x) a = (a - m) / (sd + 1e-8);
}

/// Epochs x minibatches of clipped-surrogate Adam steps on `params`.
/// Minibatch order comes from `shuffle_key`, so updates are reproducible.
inline PpoMetrics ppo_update(const nn::ActorCritic& net, nn::PolicyParams& params, RolloutBatch& batch,
                             const PpoConfig& cfg, nn::AdamState& adam, const nn::AdamHyper& hyper,
                             std::uint64_t shuffle_key) {
  PpoMetrics m;
  std::vector<double> adv = batch.advantages;
  if (cfg.normalize_advantages) normalize(adv);
  const Index N = batch.size();
  const Index mb = std::max<Index>(1, N / std::max(1, cfg.minibatches));
  std::vector<Index> order(static_cast<std::size_t>(N));
  std::iota(order.begin(), order.end(), Index{0});
  CounterRng rng(shuffle_key, 0);
  std::vector<float> grad(params.values.size());
  for (int e = 0; e < cfg.epochs; ++e) {
    double epoch_kl = 0.0;
    int epoch_used = 0;
    for (Index i = N - 1; i > 0; --i) std::swap(order[i], order[rng.below(static_cast<std::uint64_t>(i) + 1)]);
    for (Index start = 0; start + mb <= N; start += mb) {
      Mat<float> obs(batch.obs.rows(), mb), act(batch.actions.rows(), mb);
      std::vector<double> lp(mb), a(mb), r(mb);
      for (Index k = 0; k < mb; ++k) {
        const Index j = order[start + k];
        obs.col(k) = batch.obs.col(j);
        act.col(k) = batch.actions.col(j);
        lp[k] = batch.logp[j];
        a[k] = adv[j];
        r[k] = batch.returns[j];
      }
      std::fill(grad.begin(), grad.end(), 0.0f);
      const auto L = ppo_loss<float>(net, params.values, obs, act, lp, a, r, cfg, grad);
      ++m.minibatches;
      bool finite = std::isfinite(L.total);
      for (float g : grad) finite = finite && std::isfinite(g);
      if (!finite) {
        ++m.skipped;
        continue;
      }
      m.grad_norm += nn::clip_grad_norm<float>(grad, cfg.max_grad_norm);
      nn::adam_step<float>(params.values, grad, adam, hyper);
      m.policy_loss += L.policy;
      m.value_loss += L.value;
      m.entropy += L.entropy;
      m.approx_kl += L.approx_kl;
      m.clip_fraction += L.clip_fraction;
      epoch_kl += L.approx_kl;
      ++epoch_used;
    }
    ++m.epochs;
    if (cfg.target_kl > 0.0 && epoch_used > 0 && epoch_kl / epoch_used > cfg.target_kl) break;
  }
  const int used = m.minibatches - m.skipped;
  if (used > 0) {
    m.policy_loss /= used;
    m.value_loss /= used;
    m.entropy /= used;
    m.approx_kl /= used;
    m.clip_fraction /= used;
    m.grad_norm /= used;
  }
  return m;
}

// ---------------------------------------------------------------------------
// Environments and rollout collection

struct EnvStep {
  double reward = 0.0;
  bool done = false;       // episode over (terminal or time limit)
  bool truncated = false;  // time limit only; the collector bootstraps
};

/// Environment driven by the rollout collector. observe() returns the
/// observation of the current state and may be called any number of times
/// between steps.
class Env {
 public:
  virtual ~Env() = default;
  virtual void reset(std::uint64_t episode_seed) = 0;
  virtual void observe(std::span<float> out) = 0;
  virtual EnvStep step(std::span<const float> action) = 0;
};

/// Lockstep collector over a fixed set of environments. Each environment
/// owns its action-noise stream, so results do not depend on thread count.
class RolloutCollector {
 public:
  RolloutCollector(std::vector<std::unique_ptr<Env>> envs, Index obs_size, Index act_size, std::uint64_t seed,
                   int workers = 1)
      : envs_(std::move(envs)), obs_(obs_size), act_(act_size), seed_(seed), workers_(workers) {
    episode_.assign(envs_.size(), 0);
    running_return_.assign(envs_.size(), 0.0);
    for (std::size_t e = 0; e < envs_.size(); ++e) envs_[e]->reset(episode_seed(e));
  }

  /// Collects `horizon` steps from every environment and fills advantages.
  RolloutBatch collect(const nn::ActorCritic& net, const nn::PolicyParams& params, int horizon, const PpoConfig& cfg) {
    const Index E = static_cast<Index>(envs_.size());
    RolloutBatch b;
    const Index N = E * horizon;
    b.obs.resize(obs_, N);
    b.actions.resize(act_, N);
    b.logp.assign(N, 0.0);
    b.values.assign(N, 0.0);
    b.rewards.assign(N, 0.0);
    b.dones.assign(N, 0);
    std::vector<double> ls(static_cast<std::size_t>(act_));
    for (Index i = 0; i < act_; ++i) ls[i] = net.log_std<float>(params.values, i);
    std::span<const float> p(params.values);

    Mat<float> obs(obs_, E), act(act_, E);
    std::vector<EnvStep> out(E);
    std::vector<Index> truncated;
    for (int t = 0; t < horizon; ++t) {
      for (Index e = 0; e < E; ++e) envs_[e]->observe(std::span<float>(obs.col(e).data(), obs_));
      const Mat<float> mu = net.mean<float>(p, obs);
      const Mat<float> v = net.value<float>(p, obs);
      for (Index e = 0; e < E; ++e) {
        CounterRng rng(seed_, 0x5a00 + static_cast<std::uint64_t>(e), step_ * static_cast<std::uint64_t>(act_));
        for (Index i = 0; i < act_; ++i) act(i, e) = mu(i, e) + static_cast<float>(std::exp(ls[i]) * rng.normal());
      }
      parallel_for(static_cast<std::size_t>(E), workers_, [&](std::size_t e) {
        out[e] = envs_[e]->step(std::span<const float>(act.col(static_cast<Index>(e)).data(), act_));
      });
      // bootstrap time-limit endings with the value of the final observation
      truncated.clear();
      for (Index e = 0; e < E; ++e)
        if (out[e].truncated) truncated.push_back(e);
      if (!truncated.empty()) {
        Mat<float> last(obs_, static_cast<Index>(truncated.size()));
        for (std::size_t k = 0; k < truncated.size(); ++k)
          envs_[truncated[k]]->observe(std::span<float>(last.col(static_cast<Index>(k)).data(), obs_));
        const Mat<float> lv = net.value<float>(p, last);
        for (std::size_t k = 0; k < truncated.size(); ++k)
          out[truncated[k]].reward += cfg.gamma * static_cast<double>(lv(0, static_cast<Index>(k)));
      }
      for (Index e = 0; e < E; ++e) {
        const Index j = e * horizon + t;
        b.obs.col(j) = obs.col(e);
        b.actions.col(j) = act.col(e);
        b.logp[j] = gaussian_logp<float>(act.col(e).data(), mu.col(e).data(), ls);
        b.values[j] = v(0, e);
        b.rewards[j] = out[e].reward;
        b.dones[j] = out[e].done;
        running_return_[e] += out[e].reward;
        if (out[e].done) {
          b.episode_returns.push_back(running_return_[e]);
          running_return_[e] = 0.0;
          ++episode_[e];
          envs_[e]->reset(episode_seed(e));
        }
      }
      ++step_;
    }
    // bootstrap values for the state after the horizon
    Mat<float> last(obs_, E);
    for (Index e = 0; e < E; ++e) envs_[e]->observe(std::span<float>(last.col(e).data(), obs_));
    const Mat<float> lv = net.value<float>(p, last);
    b.advantages.assign(N, 0.0);
    b.returns.assign(N, 0.0);
    for (Index e = 0; e < E; ++e) {
      std::vector<double> vals(b.values.begin() + e * horizon, b.values.begin() + (e + 1) * horizon);
      vals.push_back(lv(0, e));
      const auto g = compute_gae(std::span<const double>(b.rewards).subspan(e * horizon, horizon), vals,
                                 std::span<const char>(b.dones).subspan(e * horizon, horizon), cfg.gamma, cfg.lambda);
      std::copy(g.advantages.begin(), g.advantages.end(), b.advantages.begin() + e * horizon);
      std::copy(g.returns.begin(), g.returns.end(), b.returns.begin() + e * horizon);
    }
    return b;
  }

  std::size_t size() const { return envs_.size(); }

 private:
  std::uint64_t episode_seed(std::size_t e) const {
    return derive_key(derive_key(seed_, 0xe915 + e), static_cast<std::uint64_t>(episode_[e]));
  }

  std::vector<std::unique_ptr<Env>> envs_;
  Index obs_, act_;
  std::uint64_t seed_;
  int workers_;
  std::uint64_t step_ = 0;
  std::vector<long> episode_;
  std::vector<double> running_return_;
};

}  // namespace hiernav::rl
