#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "hiernav/core/math.hpp"
#include "hiernav/core/rng.hpp"

namespace hiernav {

inline constexpr int kTickHz = 38;
inline constexpr double kTickDt = 1.0 / kTickHz;

struct RobotState {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
  double v = 0.0;
  double omega = 0.0;
  double v_lat = 0.0;
  double instability = 0.0;

  bool operator==(const RobotState&) const = default;
};

struct GaitAction {
  double forward = 0.0;  // a_f in [-1, 1]
  double turn = 0.0;     // a_t in [-1, 1]

  GaitAction clipped() const { return {clip(forward, -1.0, 1.0), clip(turn, -1.0, 1.0)}; }
  bool operator==(const GaitAction&) const = default;
};

struct Push {
  double time = 0.0;
  Vec2 impulse;  // body frame: (forward, lateral) velocity kick
};

/// Hidden per-episode plant parameters.
struct Extrinsics {
  double gain_v = 1.0;
  double gain_w = 1.0;
  double damp_v = 1.0;
  double damp_w = 1.0;
  int latency = 0;  // ticks
  std::array<double, 3> noise_std{0.0, 0.0, 0.0};  // (v, omega, v_lat) acceleration noise
  double slip_coeff = 0.0;
  std::vector<Push> push_schedule;
  std::uint64_t noise_key = 0;

  static Extrinsics nominal() { return {}; }
};

struct PlantLimits {
  static constexpr double max_v = 1.5;
  static constexpr double max_omega = 3.0;
  static constexpr double fall_instability = 1.5;
  static constexpr double fall_lateral = 0.6;
  static constexpr double force_v = 2.0;
  static constexpr double force_w = 4.0;
  static constexpr double slip_decay = 2.0;
  static constexpr double push_rate = 0.1;      // pushes per second
  static constexpr double push_magnitude = 0.3;  // m/s
  static constexpr double schedule_horizon = 130.0;
};

/// Domain-randomized extrinsics drawn uniformly within the documented ranges.
inline Extrinsics sample_extrinsics(std::uint64_t seed) {
  CounterRng rng(seed, 0x9a17, 0);
  Extrinsics e;
  e.gain_v = rng.uniform(0.6, 1.4);
  e.gain_w = rng.uniform(0.6, 1.4);
  e.damp_v = rng.uniform(0.6, 1.0);
  e.damp_w = rng.uniform(0.6, 1.0);
  e.latency = static_cast<int>(rng.below(4));
  e.noise_std = {rng.uniform(0.0, 0.2), rng.uniform(0.0, 0.3), rng.uniform(0.0, 0.1)};
  e.slip_coeff = rng.uniform(0.0, 0.5);
  double t = rng.exponential(PlantLimits::push_rate);
  while (t < PlantLimits::schedule_horizon) {
    const double angle = rng.uniform(-kPi, kPi);
    const double mag = rng.uniform(0.0, PlantLimits::push_magnitude);
    e.push_schedule.push_back({t, {mag * std::cos(angle), mag * std::sin(angle)}});
    t += rng.exponential(PlantLimits::push_rate);
  }
  e.noise_key = derive_key(seed, 0x4e01);
  return e;
}

/// Gait-proxy dynamics stepped at 38 Hz. Holds the latency queue, so a Plant
/// value is the full hidden state between ticks.
class Plant {
 public:
  Plant() : Plant(Extrinsics::nominal()) {}
  explicit Plant(Extrinsics extrinsics) : ext_(std::move(extrinsics)) {
    queue_.fill(GaitAction{});
  }

  /// Advances one tick. Returns true if the body fell during this tick.
  bool step(RobotState& s, GaitAction action, double dt = kTickDt) {
    action = action.clipped();
    // queue_[0] holds the action from `latency` ticks ago
    GaitAction delayed;
    if (ext_.latency == 0) {
      delayed = action;
    } else {
      delayed = queue_[0];
      for (int i = 0; i + 1 < ext_.latency; ++i) queue_[i] = queue_[i + 1];
      queue_[ext_.latency - 1] = action;
    }

    double eta_v = 0.0, eta_w = 0.0, eta_lat = 0.0;
    if (ext_.noise_std[0] > 0.0 || ext_.noise_std[1] > 0.0 || ext_.noise_std[2] > 0.0) {
      CounterRng rng(ext_.noise_key, tick_ * 8);
      eta_v = ext_.noise_std[0] * rng.normal();
      eta_w = ext_.noise_std[1] * rng.normal();
      eta_lat = ext_.noise_std[2] * rng.normal();
    }

    const double v_dot = PlantLimits::force_v * ext_.gain_v * delayed.forward - ext_.damp_v * s.v + eta_v;
    const double w_dot = PlantLimits::force_w * ext_.gain_w * delayed.turn - ext_.damp_w * s.omega + eta_w;
    const double lat_dot =
        ext_.slip_coeff * std::abs(s.omega) * s.v - PlantLimits::slip_decay * s.v_lat + eta_lat;

    s.v = clip(s.v + v_dot * dt, -PlantLimits::max_v, PlantLimits::max_v);
    s.omega = clip(s.omega + w_dot * dt, -PlantLimits::max_omega, PlantLimits::max_omega);
    s.v_lat += lat_dot * dt;
    s.instability = 0.95 * s.instability + std::abs(w_dot) * dt + std::abs(lat_dot) * dt;

    const double t_next = (tick_ + 1) * dt;
    while (next_push_ < ext_.push_schedule.size() && ext_.push_schedule[next_push_].time < t_next) {
      const Vec2 kick = ext_.push_schedule[next_push_].impulse;
      s.v = clip(s.v + kick.x, -PlantLimits::max_v, PlantLimits::max_v);
      s.v_lat += kick.y;
      ++next_push_;
    }

    // semi-implicit: pose uses the updated velocities
    s.theta = wrap_angle(s.theta + s.omega * dt);
    const double c = std::cos(s.theta), sn = std::sin(s.theta);
    s.x += (s.v * c - s.v_lat * sn) * dt;
    s.y += (s.v * sn + s.v_lat * c) * dt;

    ++tick_;
    return s.instability > PlantLimits::fall_instability || std::abs(s.v_lat) > PlantLimits::fall_lateral;
  }

  const Extrinsics& extrinsics() const { return ext_; }
  std::uint64_t tick() const { return tick_; }

 private:
  Extrinsics ext_;
  std::array<GaitAction, 3> queue_{};
  std::uint64_t tick_ = 0;
  std::size_t next_push_ = 0;
};

}  // namespace hiernav
