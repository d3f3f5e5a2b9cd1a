#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "hiernav/sensing.hpp"

using namespace hiernav;

namespace {

Scene empty_scene() { return Scene{}; }

// Marches along the ray in 1 mm steps until it enters a footprint or leaves
// the corridor.
double brute_force_range(const Scene& s, Vec2 o, double angle, double max_range) {
  const Vec2 d{std::cos(angle), std::sin(angle)};
  for (int k = 0; k <= static_cast<int>(max_range * 1000); ++k) {
    const double t = k * 1e-3;
    const Vec2 p = o + d * t;
    if (p.y <= 0.0 || p.y >= s.corridor_width) return t;
    for (const auto& ob : s.obstacles)
      if (ob.contains(p)) return t;
    for (const auto& ped : s.pedestrians)
      if ((p - ped.position).norm() < ped.radius) return t;
  }
  return max_range;
}

Scene mirrored(const Scene& s) {
  Scene m = s;
  for (auto& o : m.obstacles) o.center.y = s.corridor_width - o.center.y;
  for (auto& p : m.pedestrians) p.position.y = s.corridor_width - p.position.y;
  return m;
}

}  // namespace

TEST(Raycast, PerpendicularWallDistance) {
  const double angle = kPi / 2;
  const auto r = raycast(empty_scene(), {10.0, 1.5}, std::span<const double>(&angle, 1));
  EXPECT_NEAR(r[0], 1.5, 1e-12);
}

TEST(Raycast, ClipsAtMaxRange) {
  const double angle = 0.0;
  const auto r = raycast(empty_scene(), {10.0, 1.5}, std::span<const double>(&angle, 1));
  EXPECT_DOUBLE_EQ(r[0], 5.0);
}

TEST(Raycast, CircleAheadGivesDistanceMinusRadius) {
  Scene s = empty_scene();
  s.obstacles.push_back({ObstacleShape::Circle, {13.0, 1.5}, {0.4, 0.4}, 0});
  const double angle = 0.0;
  const auto r = raycast(s, {10.0, 1.5}, std::span<const double>(&angle, 1));
  EXPECT_NEAR(r[0], 3.0 - 0.4, 1e-12);
}

TEST(Raycast, BoxFaceDistance) {
  Scene s = empty_scene();
  s.obstacles.push_back({ObstacleShape::Box, {12.0, 1.4}, {0.5, 0.3}, 0});
  const double angle = 0.0;
  const auto r = raycast(s, {10.0, 1.5}, std::span<const double>(&angle, 1));
  EXPECT_NEAR(r[0], 1.5, 1e-12);
}

TEST(Raycast, AgreesWithDenseSamplingOracle) {
  CounterRng rng(99, 1, 0);
  int checked = 0;
  for (int trial = 0; checked < 100; ++trial) {
    const auto diff = static_cast<Difficulty>(trial % 3);
    Scene s = generate_scene(500 + trial, diff);
    for (int k = 0; k < 200; ++k) advance_pedestrians(s);
    const Vec2 o{rng.uniform(0.0, 45.0), rng.uniform(0.35, 2.65)};
    if (robot_collides(s, o)) continue;
    ++checked;
    const double heading = rng.uniform(-kPi, kPi);
    std::vector<double> angles;
    for (double off : beam_offsets()) angles.push_back(heading + off);
    const auto fast = raycast(s, o, angles);
    for (std::size_t i = 0; i < angles.size(); ++i)
      ASSERT_NEAR(fast[i], brute_force_range(s, o, angles[i], 5.0), 2e-3) << "scene " << trial << " beam " << i;
  }
}

TEST(Raycast, MirrorSymmetry) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Scene s = generate_scene(seed, Difficulty::Hard);
    const Scene m = mirrored(s);
    RobotState r;
    r.x = 4.0 + seed;
    r.y = 1.2;
    r.theta = 0.3;
    RobotState rm = r;
    rm.y = s.corridor_width - r.y;
    rm.theta = -r.theta;
    const auto a = observe(s, r).ranges;
    const auto b = observe(m, rm).ranges;
    for (int i = 0; i < SensorConstants::beams; ++i)
      EXPECT_NEAR(a[i], b[SensorConstants::beams - 1 - i], 1e-9) << "seed " << seed << " beam " << i;
  }
}

TEST(Observe, RangesAreInsideSensorInterval) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Scene s = generate_scene(seed, Difficulty::Medium);
    RobotState r = start_state(s);
    r.x = 20.0;
    r.theta = 2.0 * seed;
    for (double v : observe(s, r).ranges) {
      EXPECT_GT(v, 0.0);
      EXPECT_LE(v, 5.0);
    }
  }
}

TEST(Observe, FrameConventions) {
  const Scene s = empty_scene();
  const RobotState r = start_state(s);
  const Observation o = observe(s, r);
  EXPECT_EQ(o.heading, 0.0);
  EXPECT_NEAR(o.goal_bearing, 0.0, 1e-12);
  EXPECT_EQ(o.forward_speed, 0.0);
  EXPECT_EQ(o.yaw_rate, 0.0);
}

TEST(Observe, HeadingWrapsAcrossPi) {
  const Scene s = empty_scene();
  RobotState r = start_state(s);
  r.theta = kPi + 0.1;
  EXPECT_NEAR(observe(s, r).heading, -kPi + 0.1, 1e-12);
  r.theta = -kPi;
  EXPECT_NEAR(observe(s, r).heading, kPi, 1e-12);
}
