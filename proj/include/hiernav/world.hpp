#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <queue>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "hiernav/core/errors.hpp"
#include "hiernav/core/math.hpp"
#include "hiernav/core/rng.hpp"
#include "hiernav/plant.hpp"

namespace hiernav {

enum class Difficulty { Easy, Medium, Hard };

inline std::string_view to_string(Difficulty d) {
  switch (d) {
    case Difficulty::Easy: return "easy";
    case Difficulty::Medium: return "medium";
    case Difficulty::Hard: return "hard";
  }
  return "easy";
}

inline Difficulty parse_difficulty(std::string_view s) {
  if (s == "easy" || s == "Easy") return Difficulty::Easy;
  if (s == "medium" || s == "Medium") return Difficulty::Medium;
  if (s == "hard" || s == "Hard") return Difficulty::Hard;
  throw ConfigError("unknown difficulty '" + std::string(s) + "' (expected easy|medium|hard)");
}

struct WorldConstants {
  static constexpr double corridor_width = 3.0;
  static constexpr double corridor_length = 50.0;
  static constexpr double robot_radius = 0.3;
  static constexpr double pedestrian_radius = 0.3;
  static constexpr double pedestrian_speed = 1.0;
  static constexpr double pedestrian_max_speed = 1.6;
  static constexpr double gp_lengthscale = 2.0;
  static constexpr double gp_std = 0.3;
  static constexpr double gp_dt = 0.1;
  static constexpr double gp_duration = 130.0;
  static constexpr double episode_limit = 120.0;
  static constexpr int episode_limit_ticks = static_cast<int>(episode_limit * kTickHz);
  static constexpr double min_extent = 0.15;
  static constexpr double max_extent = 0.6;
  // Free gap the feasibility check demands between footprints (robot diameter + 0.2 m).
  static constexpr double feasibility_gap = 0.8;
  static constexpr Vec2 start{0.0, corridor_width / 2};
};

enum class ObstacleShape { Circle, Box };

struct Obstacle {
  ObstacleShape shape = ObstacleShape::Circle;
  Vec2 center;
  Vec2 extent;  // circle: (radius, radius); box: half-extents
  int id = 0;

  double bounding_radius() const {
    return shape == ObstacleShape::Circle ? extent.x : std::hypot(extent.x, extent.y);
  }

  // Euclidean distance from p to the footprint (0 inside).
  double distance(Vec2 p) const {
    if (shape == ObstacleShape::Circle) return std::max(0.0, (p - center).norm() - extent.x);
    const double dx = std::max(std::abs(p.x - center.x) - extent.x, 0.0);
    const double dy = std::max(std::abs(p.y - center.y) - extent.y, 0.0);
    return std::hypot(dx, dy);
  }

  bool contains(Vec2 p) const {
    if (shape == ObstacleShape::Circle) return (p - center).norm() < extent.x;
    return std::abs(p.x - center.x) < extent.x && std::abs(p.y - center.y) < extent.y;
  }
};

struct Pedestrian {
  Vec2 position;
  Vec2 velocity;
  double radius = WorldConstants::pedestrian_radius;
  std::vector<Vec2> gp_track;  // velocity perturbation sampled every gp_dt seconds
  double gp_dt = WorldConstants::gp_dt;
  std::vector<Vec2> waypoints;
  std::size_t next_waypoint = 0;

  Vec2 perturbation(double t) const {
    if (gp_track.empty()) return {};
    const double s = t / gp_dt;
    const auto i = static_cast<std::size_t>(std::floor(s));
    if (i + 1 >= gp_track.size()) return gp_track.back();
    const double w = s - static_cast<double>(i);
    return gp_track[i] * (1.0 - w) + gp_track[i + 1] * w;
  }
};

struct Scene {
  std::uint64_t seed = 0;
  Difficulty difficulty = Difficulty::Easy;
  double corridor_width = WorldConstants::corridor_width;
  double corridor_length = WorldConstants::corridor_length;
  std::vector<Obstacle> obstacles;
  std::vector<Pedestrian> pedestrians;
  double goal_x = WorldConstants::corridor_length;
  std::uint64_t tick = 0;

  double time() const { return static_cast<double>(tick) * kTickDt; }
};

enum class EpisodeState { Running, SuccessReachedGoal, FailCollision, FailFall, FailTimeout, FailAborted };

inline std::string_view to_string(EpisodeState s) {
  switch (s) {
    case EpisodeState::Running: return "running";
    case EpisodeState::SuccessReachedGoal: return "success";
    case EpisodeState::FailCollision: return "collision";
    case EpisodeState::FailFall: return "fall";
    case EpisodeState::FailTimeout: return "timeout";
    case EpisodeState::FailAborted: return "aborted";
  }
  return "running";
}

inline EpisodeState parse_episode_state(std::string_view s) {
  for (auto st : {EpisodeState::Running, EpisodeState::SuccessReachedGoal, EpisodeState::FailCollision,
                  EpisodeState::FailFall, EpisodeState::FailTimeout, EpisodeState::FailAborted})
    if (to_string(st) == s) return st;
  throw FormatError("unknown episode state '" + std::string(s) + "'");
}

struct EpisodeStatus {
  EpisodeState state = EpisodeState::Running;
  double travel_distance = 0.0;
  double elapsed = 0.0;
  std::uint64_t ticks = 0;

  bool terminal() const { return state != EpisodeState::Running; }
  bool success() const { return state == EpisodeState::SuccessReachedGoal; }
};

// ---------------------------------------------------------------------------
// Gaussian-process velocity perturbations

namespace detail {

struct GpKey {
  std::size_t n;
  double dt, lengthscale, variance;
  auto operator<=>(const GpKey&) const = default;
};

// Cholesky factors are shared between all tracks with the same Gram matrix.
inline std::shared_ptr<const Eigen::MatrixXd> gp_factor(const GpKey& key) {
  static std::mutex mutex;
  static std::map<GpKey, std::shared_ptr<const Eigen::MatrixXd>> cache;
  std::lock_guard lock(mutex);
  if (auto it = cache.find(key); it != cache.end()) return it->second;
  const auto n = static_cast<Eigen::Index>(key.n);
  Eigen::MatrixXd gram(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const double d = static_cast<double>(i - j) * key.dt;
      gram(i, j) = key.variance * std::exp(-d * d / (2.0 * key.lengthscale * key.lengthscale));
    }
  gram.diagonal().array() += 1e-8;
  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success) throw NumericalError("GP Gram matrix is not positive definite after jitter");
  auto factor = std::make_shared<const Eigen::MatrixXd>(llt.matrixL());
  cache.emplace(key, factor);
  return factor;
}

}  // namespace detail

/// Zero-mean GP sample with squared-exponential kernel, independent per axis.
/// Returns floor(duration/dt)+1 samples at t = 0, dt, 2dt, ...
inline std::vector<Vec2> sample_gp_track(std::uint64_t seed, double duration, double dt, double lengthscale,
                                         double variance) {
  if (!(duration > 0) || !(dt > 0) || !(lengthscale > 0) || !(variance >= 0))
    throw ConfigError("sample_gp_track: need duration > 0, dt > 0, lengthscale > 0, variance >= 0");
  const auto n = static_cast<std::size_t>(std::floor(duration / dt + 1e-9)) + 1;
  std::vector<Vec2> track(n);
  if (variance == 0.0) return track;
  const auto factor = detail::gp_factor({n, dt, lengthscale, variance});
  CounterRng rng(seed, 0x6b7, 0);
  Eigen::VectorXd zx(n), zy(n);
  for (std::size_t i = 0; i < n; ++i) zx[i] = rng.normal();
  for (std::size_t i = 0; i < n; ++i) zy[i] = rng.normal();
  const Eigen::VectorXd sx = factor->triangularView<Eigen::Lower>() * zx;
  const Eigen::VectorXd sy = factor->triangularView<Eigen::Lower>() * zy;
  for (std::size_t i = 0; i < n; ++i) track[i] = {sx[i], sy[i]};
  return track;
}

// ---------------------------------------------------------------------------
// Scene generation

/// True when the robot centre can travel from the start to the goal line
/// keeping `gap/2` clearance from every footprint and wall. Grid search at 5 cm.
inline bool layout_feasible(const std::vector<Obstacle>& obstacles, double width, double length,
                            double gap = WorldConstants::feasibility_gap) {
  constexpr double res = 0.05;
  const double clearance = gap / 2.0;
  const int nx = static_cast<int>(std::ceil(length / res)) + 1;
  const int ny = static_cast<int>(std::floor(width / res)) + 1;
  std::vector<char> free(static_cast<std::size_t>(nx) * ny, 0);
  auto idx = [ny](int ix, int iy) { return static_cast<std::size_t>(ix) * ny + iy; };
  for (int ix = 0; ix < nx; ++ix) {
    const double x = ix * res;
    for (int iy = 0; iy < ny; ++iy) {
      const double y = iy * res;
      if (y < clearance || y > width - clearance) continue;
      bool ok = true;
      for (const auto& o : obstacles) {
        if (std::abs(o.center.x - x) > o.bounding_radius() + clearance) continue;
        if (o.distance({x, y}) < clearance) {
          ok = false;
          break;
        }
      }
      free[idx(ix, iy)] = ok;
    }
  }
  const int sy = static_cast<int>(std::lround(width / 2.0 / res));
  if (!free[idx(0, sy)]) return false;
  std::vector<char> seen(free.size(), 0);
  std::queue<std::pair<int, int>> open;
  open.emplace(0, sy);
  seen[idx(0, sy)] = 1;
  while (!open.empty()) {
    auto [ix, iy] = open.front();
    open.pop();
    if (ix == nx - 1) return true;
    constexpr int dirs[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
    for (auto [dx, dy] : dirs) {
      const int jx = ix + dx, jy = iy + dy;
      if (jx < 0 || jy < 0 || jx >= nx || jy >= ny) continue;
      const auto j = idx(jx, jy);
      if (!free[j] || seen[j]) continue;
      seen[j] = 1;
      open.emplace(jx, jy);
    }
  }
  return false;
}

namespace detail {

inline int obstacle_mean(Difficulty d) { return d == Difficulty::Easy ? 5 : 15; }

inline std::optional<std::vector<Obstacle>> try_layout(CounterRng& rng, int count, double width, double length) {
  std::vector<Obstacle> obstacles;
  constexpr double margin = 0.05;
  for (int k = 0; k < count; ++k) {
    bool placed = false;
    for (int attempt = 0; attempt < 50 && !placed; ++attempt) {
      Obstacle o;
      o.id = k;
      o.shape = rng.uniform() < 0.5 ? ObstacleShape::Circle : ObstacleShape::Box;
      if (o.shape == ObstacleShape::Circle) {
        const double r = rng.uniform(WorldConstants::min_extent, WorldConstants::max_extent);
        o.extent = {r, r};
      } else {
        o.extent = {rng.uniform(WorldConstants::min_extent, WorldConstants::max_extent),
                    rng.uniform(WorldConstants::min_extent, WorldConstants::max_extent)};
      }
      const double half_y = o.extent.y;
      o.center = {rng.uniform(3.0, length - 2.0), rng.uniform(half_y + margin, width - half_y - margin)};
      bool overlap = false;
      for (const auto& other : obstacles)
        if ((o.center - other.center).norm() < o.bounding_radius() + other.bounding_radius() + margin) {
          overlap = true;
          break;
        }
      if (!overlap) {
        obstacles.push_back(o);
        placed = true;
      }
    }
    if (!placed) return std::nullopt;
  }
  if (!layout_feasible(obstacles, width, length)) return std::nullopt;
  return obstacles;
}

inline Pedestrian spawn_pedestrian(std::uint64_t scene_seed, int index, double width, double length) {
  CounterRng rng(scene_seed, 0x9ed0 + static_cast<std::uint64_t>(index), 0);
  Pedestrian p;
  const double lo = 0.6, hi = width - 0.6;
  p.position = {rng.uniform(12.0, length - 2.0), rng.uniform(lo, hi)};
  // oncoming path: waypoints every ~5 m down to the start end
  for (double x = p.position.x - rng.uniform(3.0, 6.0); x > 0.3; x -= rng.uniform(3.0, 6.0))
    p.waypoints.push_back({x, rng.uniform(lo, hi)});
  p.waypoints.push_back({0.3, rng.uniform(lo, hi)});
  p.gp_track = sample_gp_track(derive_key(scene_seed, 0x6a00 + static_cast<std::uint64_t>(index)),
                               WorldConstants::gp_duration, WorldConstants::gp_dt, WorldConstants::gp_lengthscale,
                               sq(WorldConstants::gp_std));
  return p;
}

}  // namespace detail

inline Scene generate_scene(std::uint64_t seed, Difficulty difficulty) {
  Scene scene;
  scene.seed = seed;
  scene.difficulty = difficulty;
  CounterRng rng(seed, 0x5ce7e, 0);

  const int mean = detail::obstacle_mean(difficulty);
  int count = std::clamp(rng.poisson(mean), std::max(1, mean - 3), mean + 3);
  std::optional<std::vector<Obstacle>> layout;
  while (!layout) {
    if (count < 1) throw GenerationError("generate_scene: no feasible layout for seed " + std::to_string(seed));
    for (int attempt = 0; attempt < 100 && !layout; ++attempt)
      layout = detail::try_layout(rng, count, scene.corridor_width, scene.corridor_length);
    if (!layout) --count;
  }
  scene.obstacles = std::move(*layout);

  int n_ped = difficulty == Difficulty::Hard ? 4 : (rng.uniform() < 0.5 ? 0 : 1);
  for (int i = 0; i < n_ped; ++i)
    scene.pedestrians.push_back(detail::spawn_pedestrian(seed, i, scene.corridor_width, scene.corridor_length));
  return scene;
}

// ---------------------------------------------------------------------------
// Stepping

inline void advance_pedestrians(Scene& scene, double dt = kTickDt) {
  const double t = scene.time();
  for (auto& p : scene.pedestrians) {
    while (p.next_waypoint < p.waypoints.size()) {
      const Vec2 wp = p.waypoints[p.next_waypoint];
      if (p.position.x <= wp.x || (wp - p.position).norm() < 0.3)
        ++p.next_waypoint;
      else
        break;
    }
    Vec2 vel{};
    if (p.next_waypoint < p.waypoints.size()) {
      const Vec2 to = p.waypoints[p.next_waypoint] - p.position;
      const double d = to.norm();
      if (d > 1e-9) vel = to * (WorldConstants::pedestrian_speed / d);
      vel += p.perturbation(t);
    }
    const double speed = vel.norm();
    if (speed > WorldConstants::pedestrian_max_speed) vel = vel * (WorldConstants::pedestrian_max_speed / speed);
    p.position += vel * dt;
    const double lo = p.radius, hi = scene.corridor_width - p.radius;
    if (p.position.y < lo) {
      p.position.y = 2 * lo - p.position.y;
      vel.y = -vel.y;
    } else if (p.position.y > hi) {
      p.position.y = 2 * hi - p.position.y;
      vel.y = -vel.y;
    }
    p.position.y = clip(p.position.y, lo, hi);
    p.position.x = clip(p.position.x, 0.0, scene.corridor_length);
    p.velocity = vel;
  }
  ++scene.tick;
}

inline bool robot_collides(const Scene& scene, Vec2 robot, double radius = WorldConstants::robot_radius) {
  if (robot.y - radius < 0.0 || robot.y + radius > scene.corridor_width) return true;
  for (const auto& o : scene.obstacles)
    if (o.distance(robot) < radius) return true;
  for (const auto& p : scene.pedestrians)
    if ((p.position - robot).norm() < p.radius + radius) return true;
  return false;
}

/// Advances pedestrians by one tick and evaluates termination for the robot's
/// post-step pose. Terminal states are absorbing.
inline EpisodeStatus step_world(Scene& scene, const RobotState& robot, const EpisodeStatus& prev,
                                int limit_ticks = WorldConstants::episode_limit_ticks) {
  if (prev.terminal()) return prev;
  advance_pedestrians(scene);
  EpisodeStatus s = prev;
  s.ticks = prev.ticks + 1;
  s.elapsed = static_cast<double>(s.ticks) * kTickDt;
  s.travel_distance = std::max(prev.travel_distance, clip(robot.x - WorldConstants::start.x, 0.0, scene.corridor_length));
  if (robot_collides(scene, {robot.x, robot.y}))
    s.state = EpisodeState::FailCollision;
  else if (robot.x >= scene.goal_x)
    s.state = EpisodeState::SuccessReachedGoal;
  else if (s.ticks >= static_cast<std::uint64_t>(limit_ticks))
    s.state = EpisodeState::FailTimeout;
  return s;
}

inline RobotState start_state(const Scene& scene) {
  RobotState s;
  s.x = WorldConstants::start.x;
  s.y = scene.corridor_width / 2.0;
  return s;
}

// ---------------------------------------------------------------------------
// Canonical JSON: sorted keys, every float rounded to 9 significant digits.

inline double round9(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return std::strtod(buf, nullptr);
}

inline nlohmann::json vec_json(Vec2 v) { return nlohmann::json::array({round9(v.x), round9(v.y)}); }
inline Vec2 json_vec(const nlohmann::json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

inline nlohmann::json scene_to_json(const Scene& s) {
  nlohmann::json j;
  j["seed"] = s.seed;
  j["difficulty"] = std::string(to_string(s.difficulty));
  j["corridor_width"] = round9(s.corridor_width);
  j["corridor_length"] = round9(s.corridor_length);
  j["goal_x"] = round9(s.goal_x);
  j["tick"] = s.tick;
  auto& obs = j["obstacles"] = nlohmann::json::array();
  for (const auto& o : s.obstacles)
    obs.push_back({{"id", o.id},
                   {"shape", o.shape == ObstacleShape::Circle ? "circle" : "box"},
                   {"center", vec_json(o.center)},
                   {"extent", vec_json(o.extent)}});
  auto& peds = j["pedestrians"] = nlohmann::json::array();
  for (const auto& p : s.pedestrians) {
    nlohmann::json pj;
    pj["position"] = vec_json(p.position);
    pj["velocity"] = vec_json(p.velocity);
    pj["radius"] = round9(p.radius);
    pj["gp_dt"] = round9(p.gp_dt);
    pj["next_waypoint"] = p.next_waypoint;
    auto& wps = pj["waypoints"] = nlohmann::json::array();
    for (auto w : p.waypoints) wps.push_back(vec_json(w));
    auto& track = pj["gp_track"] = nlohmann::json::array();
    for (auto g : p.gp_track) track.push_back(vec_json(g));
    peds.push_back(std::move(pj));
  }
  return j;
}

inline std::string scene_canonical_json(const Scene& s) { return scene_to_json(s).dump(); }

inline Scene scene_from_json(const nlohmann::json& j) {
  try {
    Scene s;
    s.seed = j.at("seed").get<std::uint64_t>();
    s.difficulty = parse_difficulty(j.at("difficulty").get<std::string>());
    s.corridor_width = j.at("corridor_width").get<double>();
    s.corridor_length = j.at("corridor_length").get<double>();
    s.goal_x = j.at("goal_x").get<double>();
    s.tick = j.at("tick").get<std::uint64_t>();
    for (const auto& oj : j.at("obstacles")) {
      Obstacle o;
      o.id = oj.at("id").get<int>();
      o.shape = oj.at("shape").get<std::string>() == "circle" ? ObstacleShape::Circle : ObstacleShape::Box;
      o.center = json_vec(oj.at("center"));
      o.extent = json_vec(oj.at("extent"));
      s.obstacles.push_back(o);
    }
    for (const auto& pj : j.at("pedestrians")) {
      Pedestrian p;
      p.position = json_vec(pj.at("position"));
      p.velocity = json_vec(pj.at("velocity"));
      p.radius = pj.at("radius").get<double>();
      p.gp_dt = pj.at("gp_dt").get<double>();
      p.next_waypoint = pj.at("next_waypoint").get<std::size_t>();
      for (const auto& w : pj.at("waypoints")) p.waypoints.push_back(json_vec(w));
      for (const auto& g : pj.at("gp_track")) p.gp_track.push_back(json_vec(g));
      s.pedestrians.push_back(std::move(p));
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("scene json: ") + e.what());
  }
}

}  // namespace hiernav
