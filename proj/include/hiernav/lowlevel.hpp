#pragma once

#include <cmath>
#include <memory>
#include <string>

#include <json.hpp>

#include "hiernav/controllers/mpc.hpp"
#include "hiernav/core/errors.hpp"
#include "hiernav/hierarchy.hpp"
#include "hiernav/nn/actor_critic.hpp"
#include "hiernav/nn/params.hpp"
#include "hiernav/plant.hpp"

namespace hiernav {

/// Which plant an episode runs on. Randomized plants draw their extrinsics
/// from the episode seed, so the same seed always yields the same plant.
struct PlantMode {
  bool randomize = false;
  double slip_min = 0.0;  // remaps slip_coeff into [slip_min, 0.5] when > 0
  std::uint64_t salt = 0x91a7;

  Extrinsics extrinsics(std::uint64_t episode_seed) const {
    if (!randomize) return Extrinsics::nominal();
    Extrinsics e = sample_extrinsics(derive_key(episode_seed, salt));
    if (slip_min > 0.0) e.slip_coeff = slip_min + (0.5 - slip_min) * (e.slip_coeff / 0.5);
    return e;
  }

  nlohmann::json to_json() const { return {{"randomize", randomize}, {"slip_min", slip_min}, {"salt", salt}}; }
  static PlantMode from_json(const nlohmann::json& j) {
    PlantMode m;
    m.randomize = j.value("randomize", false);
    m.slip_min = j.value("slip_min", 0.0);
    m.salt = j.value("salt", std::uint64_t{0x91a7});
    return m;
  }
};

/// Executes commands exactly: the body moves at (v_cmd, w_cmd) every tick.
class IdealIntegrator : public LowLevel {
 public:
  void reset(std::uint64_t) override {}
  bool step(RobotState& s, const Command& u) override {
    s.v = u.v;
    s.omega = u.w;
    s.v_lat = 0.0;
    s.instability = 0.0;
    s.theta = wrap_angle(s.theta + s.omega * kTickDt);
    s.x += s.v * std::cos(s.theta) * kTickDt;
    s.y += s.v * std::sin(s.theta) * kTickDt;
    return false;
  }
  nlohmann::json spec() const override { return {{"kind", "ideal"}}; }
};

/// Shared base for controllers that drive the gait-proxy plant.
class PlantLowLevel : public LowLevel {
 public:
  explicit PlantLowLevel(PlantMode mode) : mode_(mode) {}

  void reset(std::uint64_t episode_seed) override {
    plant_ = Plant(mode_.extrinsics(episode_seed));
    history_.clear();
    last_ = {};
    on_reset();
  }

  bool step(RobotState& s, const Command& u) override {
    history_.push(u, s, last_);
    last_ = decide(s, u).clipped();
    return plant_.step(s, last_);
  }

  GaitAction last_action() const override { return last_; }
  const Plant& plant() const { return plant_; }
  const PlantMode& mode() const { return mode_; }

 protected:
  virtual void on_reset() {}
  virtual GaitAction decide(const RobotState& s, const Command& u) = 0;

  PlantMode mode_;
  Plant plant_;
  HistoryBuffer history_;
  GaitAction last_;
};

/// Trained tracking policy: deterministic mean action from the history buffer.
class LearnedGait : public PlantLowLevel {
 public:
  LearnedGait(nn::PolicyParams params, PlantMode mode, std::string source = {})
      : PlantLowLevel(mode), net_(params.arch), params_(std::move(params)), source_(std::move(source)) {
    net_.check(params_);
    if (net_.obs_size() != HistoryBuffer::feature_size || net_.act_size() != 2)
      throw ConfigError("gait checkpoint expects obs " + std::to_string(net_.obs_size()) + "/act " +
                        std::to_string(net_.act_size()) + ", need 160/2");
  }

  nlohmann::json spec() const override {
    return {{"kind", "learned"},
            {"checkpoint", source_},
            {"checksum", nn::checksum_hex(params_.values)},
            {"plant", mode_.to_json()}};
  }

 protected:
  GaitAction decide(const RobotState&, const Command&) override {
    nn::Mat<float> obs(HistoryBuffer::feature_size, 1);
    history_.flatten<float>(std::span<float>(obs.data(), HistoryBuffer::feature_size));
    const auto mean = net_.mean<float>(params_.values, obs);
    return {mean(0, 0), mean(1, 0)};
  }

 private:
  nn::ActorCritic net_;
  nn::PolicyParams params_;
  std::string source_;
};

/// Model-predictive tracker on the nominal plant model with exact state access.
class MpcGait : public PlantLowLevel {
 public:
  explicit MpcGait(PlantMode mode, controllers::MpcConfig cfg = {}) : PlantLowLevel(mode), mpc_(cfg) {}

  nlohmann::json spec() const override { return {{"kind", "mpc"}, {"plant", mode_.to_json()}}; }
  int unconverged() const { return mpc_.unconverged(); }

 protected:
  void on_reset() override { mpc_.reset(); }
  GaitAction decide(const RobotState& s, const Command& u) override { return mpc_.act(s, u); }

 private:
  controllers::MpcLite mpc_;
};

/// Rebuilds a low level from its spec() record (used by replay and the CLI).
inline std::unique_ptr<LowLevel> make_low_level(const nlohmann::json& spec) {
  const auto kind = spec.value("kind", "");
  const auto mode = PlantMode::from_json(spec.value("plant", nlohmann::json::object()));
  if (kind == "ideal") return std::make_unique<IdealIntegrator>();
  if (kind == "mpc") return std::make_unique<MpcGait>(mode);
  if (kind == "learned") {
    const auto path = spec.at("checkpoint").get<std::string>();
    auto ck = nn::load_checkpoint(path);
    if (spec.contains("checksum") && spec["checksum"].get<std::string>() != ck.checksum)
      throw ConfigError("gait checkpoint " + path + " does not match the recorded checksum");
    return std::make_unique<LearnedGait>(std::move(ck.params), mode, path);
  }
  throw ConfigError("unknown low-level kind '" + kind + "' (expected ideal|mpc|learned)");
}

}  // namespace hiernav
