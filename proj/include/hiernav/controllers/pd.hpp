#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "hiernav/core/math.hpp"
#include "hiernav/hierarchy.hpp"
#include "hiernav/plant.hpp"

namespace hiernav::controllers {

struct PdGains {
  double kp_v = 1.2;
  double kd_v = 0.1;
  double kp_w = 2.0;
  double kd_w = 0.1;
};

/// PD command toward a single set point. Distance is measured along the
/// current heading; the angular term acts on the wrapped bearing error.
inline Command pd_command(Vec2 target, const RobotState& s, const PdGains& g = {}) {
  const Vec2 d = target - Vec2{s.x, s.y};
  const double along = d.x * std::cos(s.theta) + d.y * std::sin(s.theta);
  const double bearing = d.norm() > 1e-9 ? wrap_angle(std::atan2(d.y, d.x) - s.theta) : 0.0;
  const Command raw{g.kp_v * along - g.kd_v * s.v, g.kp_w * bearing - g.kd_w * s.omega};
  return raw.clipped();
}

/// Walks a time-stamped set-point stream. Set points are consumed in order
/// once the robot is within `reach`; the PD target is the later of the first
/// unconsumed set point and the reference position `lookahead` seconds ahead.
///
/// The default lookahead (1 + kd_v) / kp_v cancels the steady-state lag of the
/// velocity loop for a reference moving at constant speed.
class SetpointFollower {
 public:
  struct Sample {
    double t;
    Vec2 p;
  };

  SetpointFollower(std::vector<Sample> setpoints, PdGains gains = {}, double reach = 0.15)
      : pts_(std::move(setpoints)), gains_(gains), reach_(reach), lookahead_((1.0 + gains.kd_v) / gains.kp_v) {}

  Command command(double t, const RobotState& s) {
    if (pts_.empty()) return {};
    const Vec2 pos{s.x, s.y};
    while (next_ + 1 < pts_.size() && (pts_[next_].p - pos).norm() < reach_) ++next_;
    const double tl = std::max(t + lookahead_, pts_[next_].t);
    return pd_command(position_at(tl), s, gains_);
  }

  // Piecewise-linear reference position, held at the ends.
  Vec2 position_at(double t) const {
    if (t <= pts_.front().t) return pts_.front().p;
    if (t >= pts_.back().t) return pts_.back().p;
    std::size_t i = 0;
    while (pts_[i + 1].t < t) ++i;
    const double w = (t - pts_[i].t) / (pts_[i + 1].t - pts_[i].t);
    return pts_[i].p * (1.0 - w) + pts_[i + 1].p * w;
  }

  std::size_t consumed() const { return next_; }
  double lookahead() const { return lookahead_; }

 private:
  std::vector<Sample> pts_;
  PdGains gains_;
  double reach_;
  double lookahead_;
  std::size_t next_ = 0;
};

}  // namespace hiernav::controllers
