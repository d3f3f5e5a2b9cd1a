#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "hiernav/core/math.hpp"
#include "hiernav/world.hpp"

namespace hiernav {

struct SensorConstants {
  static constexpr int beams = 72;
  static constexpr double fov = kPi;
  static constexpr double max_range = 5.0;
  static constexpr double min_range = 1e-3;
};

using RangeScan = std::array<double, SensorConstants::beams>;

struct Observation {
  RangeScan ranges{};       // meters, in (0, max_range]
  double heading = 0.0;     // relative to corridor axis, (-pi, pi]
  double goal_bearing = 0.0;
  double forward_speed = 0.0;
  double yaw_rate = 0.0;

  bool operator==(const Observation&) const = default;
};

/// Beam angles relative to the heading, rightmost first, symmetric about 0.
inline const std::array<double, SensorConstants::beams>& beam_offsets() {
  static const auto offsets = [] {
    std::array<double, SensorConstants::beams> a{};
    for (int i = 0; i < SensorConstants::beams; ++i)
      a[i] = -SensorConstants::fov / 2 + SensorConstants::fov * (i + 0.5) / SensorConstants::beams;
    return a;
  }();
  return offsets;
}

namespace detail {

inline constexpr double kNoHit = std::numeric_limits<double>::infinity();

// Smallest t >= 0 with |o + t d - c| = r (d unit); o inside gives 0.
inline double ray_circle(Vec2 o, Vec2 d, Vec2 c, double r) {
  const Vec2 m = o - c;
  const double b = m.dot(d);
  const double cc = m.dot(m) - r * r;
  if (cc <= 0.0) return 0.0;
  if (b > 0.0) return kNoHit;
  const double disc = b * b - cc;
  if (disc < 0.0) return kNoHit;
  return -b - std::sqrt(disc);
}

// Slab test against an axis-aligned box.
inline double ray_box(Vec2 o, Vec2 d, Vec2 c, Vec2 h) {
  double tmin = 0.0, tmax = kNoHit;
  const double lo[2] = {c.x - h.x, c.y - h.y};
  const double hi[2] = {c.x + h.x, c.y + h.y};
  const double org[2] = {o.x, o.y};
  const double dir[2] = {d.x, d.y};
  for (int a = 0; a < 2; ++a) {
    if (std::abs(dir[a]) < 1e-15) {
      if (org[a] < lo[a] || org[a] > hi[a]) return kNoHit;
      continue;
    }
    double t1 = (lo[a] - org[a]) / dir[a];
    double t2 = (hi[a] - org[a]) / dir[a];
    if (t1 > t2) std::swap(t1, t2);
    tmin = std::max(tmin, t1);
    tmax = std::min(tmax, t2);
    if (tmin > tmax) return kNoHit;
  }
  return tmin;
}

// Walls are the lines y = 0 and y = width.
inline double ray_walls(Vec2 o, Vec2 d, double width) {
  if (o.y <= 0.0 || o.y >= width) return 0.0;
  if (d.y > 1e-15) return (width - o.y) / d.y;
  if (d.y < -1e-15) return -o.y / d.y;
  return kNoHit;
}

}  // namespace detail

/// Analytic range to the nearest wall, obstacle or pedestrian along each beam
/// (world-frame angles), clipped to the sensor's range.
inline std::vector<double> raycast(const Scene& scene, Vec2 origin, std::span<const double> beam_angles,
                                   double max_range = SensorConstants::max_range) {
  std::vector<double> out(beam_angles.size());
  for (std::size_t i = 0; i < beam_angles.size(); ++i) {
    const Vec2 d{std::cos(beam_angles[i]), std::sin(beam_angles[i])};
    double t = detail::ray_walls(origin, d, scene.corridor_width);
    for (const auto& o : scene.obstacles) {
      if ((o.center - origin).norm() - o.bounding_radius() > std::min(t, max_range)) continue;
      t = std::min(t, o.shape == ObstacleShape::Circle ? detail::ray_circle(origin, d, o.center, o.extent.x)
                                                       : detail::ray_box(origin, d, o.center, o.extent));
    }
    for (const auto& p : scene.pedestrians) t = std::min(t, detail::ray_circle(origin, d, p.position, p.radius));
    out[i] = clip(t, SensorConstants::min_range, max_range);
  }
  return out;
}

inline Observation observe(const Scene& scene, const RobotState& robot) {
  Observation obs;
  std::array<double, SensorConstants::beams> angles{};
  const auto& offs = beam_offsets();
  for (int i = 0; i < SensorConstants::beams; ++i) angles[i] = robot.theta + offs[i];
  const auto r = raycast(scene, {robot.x, robot.y}, angles);
  std::copy(r.begin(), r.end(), obs.ranges.begin());
  obs.heading = wrap_angle(robot.theta);
  obs.goal_bearing =
      wrap_angle(std::atan2(scene.corridor_width / 2.0 - robot.y, scene.goal_x - robot.x) - robot.theta);
  obs.forward_speed = robot.v;
  obs.yaw_rate = robot.omega;
  return obs;
}

}  // namespace hiernav
