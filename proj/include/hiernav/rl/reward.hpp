#pragma once

#include "hiernav/hierarchy.hpp"
#include "hiernav/plant.hpp"

namespace hiernav::rl {

struct GaitRewardWeights {
  double tracking = 1.0;
  double yaw_share = 0.5;  // relative weight of the yaw-rate error
  double energy = 0.005;
  double lateral = 0.5;
  double instability = 0.1;
  double alive = 0.05;
  double fall = 5.0;
};

/// Per-tick reward of the tracking task, evaluated on the post-step state.
inline double gait_reward(const RobotState& q, const Command& u, const GaitAction& a, bool fell,
                          const GaitRewardWeights& w = {}) {
  const double track = sq(q.v - u.v) + w.yaw_share * sq(q.omega - u.w);
  double r = -w.tracking * track - w.energy * (sq(a.forward) + sq(a.turn)) - w.lateral * sq(q.v_lat) -
             w.instability * q.instability + w.alive;
  if (fell) r -= w.fall;
  return r;
}

}  // namespace hiernav::rl
