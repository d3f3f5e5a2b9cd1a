#pragma once

#include <cmath>
#include <string>

#include <json.hpp>

#include "hiernav/hierarchy.hpp"
#include "hiernav/lowlevel.hpp"

namespace hiernav {

/// Scene named by a trajectory header: generated from (seed, difficulty),
/// optionally stripped of obstacles and pedestrians.
inline Scene scene_from_header(const nlohmann::json& h) {
  const auto& s = h.at("scene");
  Scene scene = generate_scene(s.at("seed").get<std::uint64_t>(), parse_difficulty(s.at("difficulty").get<std::string>()));
  if (s.value("empty", false)) {
    scene.obstacles.clear();
    scene.pedestrians.clear();
  }
  return scene;
}

struct ReplayCheck {
  EpisodeResult replayed;
  EpisodeState recorded_status = EpisodeState::Running;
  double recorded_pose[3] = {0.0, 0.0, 0.0};
  double pose_error = 0.0;  // max over x, y, theta
  bool status_matches = false;

  bool equivalent(double tol = 1e-6) const { return status_matches && pose_error < tol; }
};

/// Re-simulates a trajectory file from its scene, low level and per-tick
/// commands, and compares the terminal status and final pose with the
/// values recorded in the header.
inline ReplayCheck replay_trajectory(const Trajectory& traj) {
  const auto& h = traj.header;
  if (!h.contains("scene") || !h.contains("low_level") || !h.contains("status") || !h.contains("final_pose"))
    throw FormatError("trajectory header lacks scene, low_level, status or final_pose");
  auto low = make_low_level(h.at("low_level"));
  const auto cmds = trajectory_commands(traj);
  ReplayCheck c;
  c.replayed = replay_episode(scene_from_header(h), *low, cmds,
                              h.value("limit_ticks", WorldConstants::episode_limit_ticks));
  c.recorded_status = parse_episode_state(h.at("status").get<std::string>());
  for (int i = 0; i < 3; ++i) c.recorded_pose[i] = h.at("final_pose").at(i).get<double>();
  const auto& f = c.replayed.final_state;
  c.pose_error = std::max({std::abs(f.x - c.recorded_pose[0]), std::abs(f.y - c.recorded_pose[1]),
                           std::abs(wrap_angle(f.theta - c.recorded_pose[2]))});
  c.status_matches = c.replayed.status.state == c.recorded_status;
  return c;
}

/// Plain-text top-down rendering of a trajectory: one row per corridor
/// column band, '#' obstacles, '*' path, 'G' goal.
inline std::string render_ascii(const Scene& scene, const Trajectory& traj, int cols = 100, int rows = 12) {
  std::vector<std::string> grid(static_cast<std::size_t>(rows), std::string(static_cast<std::size_t>(cols), ' '));
  const double sx = scene.corridor_length / cols, sy = scene.corridor_width / rows;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const Vec2 p{(c + 0.5) * sx, (r + 0.5) * sy};
      for (const auto& o : scene.obstacles)
        if (o.distance(p) < 0.5 * std::min(sx, sy)) grid[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] = '#';
    }
  for (const auto& t : traj.ticks) {
    const int c = std::clamp(static_cast<int>(t.x / sx), 0, cols - 1);
    const int r = std::clamp(static_cast<int>(t.y / sy), 0, rows - 1);
    grid[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] = '*';
  }
  const int gc = std::clamp(static_cast<int>(scene.goal_x / sx), 0, cols - 1);
  grid[static_cast<std::size_t>(rows / 2)][static_cast<std::size_t>(gc)] = 'G';
  std::string out = "+" + std::string(static_cast<std::size_t>(cols), '-') + "+\n";
  // y grows upward: print the top row first
  for (int r = rows - 1; r >= 0; --r) out += "|" + grid[static_cast<std::size_t>(r)] + "|\n";
  out += "+" + std::string(static_cast<std::size_t>(cols), '-') + "+\n";
  return out;
}

}  // namespace hiernav
