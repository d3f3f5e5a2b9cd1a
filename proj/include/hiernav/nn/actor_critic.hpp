#pragma once

#include <cmath>
#include <span>
#include <vector>

#include <json.hpp>

#include "hiernav/nn/layers.hpp"
#include "hiernav/nn/params.hpp"

namespace hiernav::nn {

/// Gaussian MLP policy (tanh mean, state-independent log-std) plus an MLP
/// value function, sharing one flat parameter vector:
/// [policy MLP | log_std (act) | value MLP].
class ActorCritic {
 public:
  ActorCritic() = default;

  explicit ActorCritic(const nlohmann::json& arch) {
    if (arch.value("kind", "") != "actor_critic") throw ConfigError("arch is not an actor_critic network");
    obs_ = arch.at("obs").get<Index>();
    act_ = arch.at("act").get<Index>();
    std::vector<Index> ph{obs_}, vh{obs_};
    for (auto h : arch.at("policy_hidden")) ph.push_back(h.get<Index>());
    for (auto h : arch.at("value_hidden")) vh.push_back(h.get<Index>());
    ph.push_back(act_);
    vh.push_back(1);
    ParamAllocator alloc;
    policy_ = MlpLayout::make(alloc, ph, true);
    log_std_ = alloc.vector(act_);
    value_ = MlpLayout::make(alloc, vh, false);
    size_ = alloc.total();
    arch_ = arch;
  }

  static nlohmann::json make_arch(Index obs, Index act, std::vector<Index> policy_hidden, std::vector<Index> value_hidden,
                                  double init_log_std = -0.5) {
    return {{"kind", "actor_critic"},
            {"obs", obs},
            {"act", act},
            {"policy_hidden", policy_hidden},
            {"value_hidden", value_hidden},
            {"init_log_std", init_log_std}};
  }

  PolicyParams init(std::uint64_t seed) const {
    PolicyParams p;
    p.arch = arch_;
    p.values.assign(size_, 0.0f);
    CounterRng rng(seed, 0xac, 0);
    std::span<float> v(p.values);
    mlp_init(v, policy_, rng, 0.01);
    mlp_init(v, value_, rng, 1.0);
    const auto ls = static_cast<float>(arch_.value("init_log_std", -0.5));
    for (Index i = 0; i < act_; ++i) p.values[log_std_ + i] = ls;
    return p;
  }

  void check(const PolicyParams& p) const {
    if (static_cast<Index>(p.values.size()) != size_)
      throw ConfigError("actor_critic: checkpoint has " + std::to_string(p.values.size()) + " values, arch needs " +
                        std::to_string(size_));
  }

  template <class S>
  Mat<S> mean(std::span<const S> p, const Mat<S>& obs, MlpCache<S>* cache = nullptr) const {
    return mlp_forward(p, policy_, obs, cache);
  }

  template <class S>
  Mat<S> value(std::span<const S> p, const Mat<S>& obs, MlpCache<S>* cache = nullptr) const {
    return mlp_forward(p, value_, obs, cache);
  }

  template <class S>
  S log_std(std::span<const S> p, Index i) const {
    return p[log_std_ + i];
  }

  Index obs_size() const { return obs_; }
  Index act_size() const { return act_; }
  Index size() const { return size_; }
  Index log_std_offset() const { return log_std_; }
  const MlpLayout& policy_layout() const { return policy_; }
  const MlpLayout& value_layout() const { return value_; }
  const nlohmann::json& arch() const { return arch_; }

 private:
  nlohmann::json arch_;
  Index obs_ = 0, act_ = 0, size_ = 0, log_std_ = 0;
  MlpLayout policy_, value_;
};

inline constexpr double kHalfLog2Pi = 0.91893853320467274178;

}  // namespace hiernav::nn
