#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "hiernav/core/math.hpp"
#include "hiernav/hierarchy.hpp"
#include "hiernav/world.hpp"

namespace hiernav::controllers {

struct DwaConfig {
  int samples_v = 11;
  int samples_w = 11;
  double accel_v = 2.0;   // m/s^2
  double accel_w = 6.0;   // rad/s^2
  double window_dt = 4 * kTickDt;  // one navigation period
  double horizon = 2.0;
  double sim_dt = 0.1;
  double safety_margin = 0.05;  // clearance below this is penalized steeply
  double clearance_cap = 0.3;   // clearance beyond this is not rewarded
  double free_cap = 3.0;        // free path length beyond this is not rewarded
  double free_step = 0.1;
  double free_min_speed = 0.1;  // curvature of near-stationary arcs uses this speed
  double w_heading = 0.3;
  double w_free = 2.0;
  double w_clearance = 1.0;
  double w_speed = 0.5;
};

/// One obstacle as the planner sees it: a footprint plus a constant velocity.
struct DwaObject {
  Obstacle shape;
  Vec2 velocity;
};

struct DwaCandidate {
  Command u;
  bool admissible = false;
  double clearance = 0.0;
  double cost = std::numeric_limits<double>::infinity();
};

/// Everything the planner knows at one decision point.
struct DwaProblem {
  RobotState robot;
  std::vector<DwaObject> objects;
  double corridor_width = WorldConstants::corridor_width;
  Vec2 goal;
};

/// Privileged view: walls always; obstacles and pedestrians only if some part
/// of them lies in the forward half-plane (the 180 degree field of view).
inline DwaProblem dwa_problem(const Scene& scene, const RobotState& robot) {
  DwaProblem p;
  p.robot = robot;
  p.corridor_width = scene.corridor_width;
  p.goal = {scene.goal_x, scene.corridor_width / 2.0};
  const double c = std::cos(robot.theta), s = std::sin(robot.theta);
  auto visible = [&](Vec2 center, double radius) {
    const Vec2 d = center - Vec2{robot.x, robot.y};
    return d.x * c + d.y * s >= -(radius + WorldConstants::robot_radius);
  };
  for (const auto& o : scene.obstacles)
    if (visible(o.center, o.bounding_radius())) p.objects.push_back({o, {}});
  for (const auto& ped : scene.pedestrians)
    if (visible(ped.position, ped.radius))
      p.objects.push_back({{ObstacleShape::Circle, ped.position, {ped.radius, ped.radius}, -1}, ped.velocity});
  return p;
}

/// Sampled (v, w) window reachable within one navigation period. The stop
/// command is not sampled; it is the fallback when no arc is admissible.
inline std::vector<Command> dwa_window(const RobotState& r, const DwaConfig& cfg) {
  const double v_lo = std::max(Command::v_min, r.v - cfg.accel_v * cfg.window_dt);
  const double v_hi = std::max(v_lo, std::min(Command::v_max, r.v + cfg.accel_v * cfg.window_dt));
  const double w_lo = std::max(-Command::w_max, r.omega - cfg.accel_w * cfg.window_dt);
  const double w_hi = std::max(w_lo, std::min(Command::w_max, r.omega + cfg.accel_w * cfg.window_dt));
  std::vector<Command> out;
  out.reserve(cfg.samples_v * cfg.samples_w);
  // mid + half * s with s antisymmetric in the index, so mirrored windows are
  // exact mirrors of each other
  auto sample = [](double lo, double hi, int i, int n) {
    if (n <= 1) return 0.5 * (lo + hi);
    return 0.5 * (lo + hi) + 0.5 * (hi - lo) * (static_cast<double>(2 * i - (n - 1)) / (n - 1));
  };
  for (int i = 0; i < cfg.samples_v; ++i)
    for (int j = 0; j < cfg.samples_w; ++j)
      out.push_back(Command{sample(v_lo, v_hi, i, cfg.samples_v), sample(w_lo, w_hi, j, cfg.samples_w)}.clipped());
  return out;
}

namespace detail {

// Signed distance from the robot disc at (x, y) to the nearest wall or object
// (objects moved to their predicted position at time t).
inline double dwa_gap(const DwaProblem& p, const std::vector<const DwaObject*>& objects, double x, double y,
                      double t) {
  double d = std::min(y, p.corridor_width - y) - WorldConstants::robot_radius;
  for (const DwaObject* o : objects) {
    Obstacle moved = o->shape;
    moved.center += o->velocity * t;
    d = std::min(d, moved.distance({x, y}) - WorldConstants::robot_radius);
  }
  return d;
}

}  // namespace detail

/// Scores one constant-command arc against `objects`. Objects are assumed to
/// be the relevant subset; the caller decides how much to prune.
///
/// An arc is admissible if the robot disc stays clear of everything over the
/// horizon. The cost adds four terms: bearing to the goal at the end of the
/// arc, free path length along the arc's curvature (up to `free_cap`, at most
/// half a turn), clearance below `clearance_cap` and missing speed.
inline DwaCandidate dwa_evaluate(const DwaProblem& p, const std::vector<const DwaObject*>& objects, const Command& u,
                                 const DwaConfig& cfg) {
  DwaCandidate c;
  c.u = u;
  double x = p.robot.x, y = p.robot.y, th = p.robot.theta;
  double clearance = cfg.clearance_cap;
  const int steps = static_cast<int>(std::lround(cfg.horizon / cfg.sim_dt));
  for (int k = 0; k <= steps; ++k) {
    if (k > 0) {
      th += u.w * cfg.sim_dt;
      x += u.v * std::cos(th) * cfg.sim_dt;
      y += u.v * std::sin(th) * cfg.sim_dt;
    }
    const double d = detail::dwa_gap(p, objects, x, y, k * cfg.sim_dt);
    // only actual contact rejects an arc; closeness is charged below, so a
    // robot that ends up near something can still move away from it
    if (d <= 0.0) return c;
    clearance = std::min(clearance, d - cfg.safety_margin);
  }
  c.admissible = true;
  c.clearance = clearance;

  double free = 0.0;
  if (u.v > 0.0) {
    const double kappa = u.w / std::max(u.v, cfg.free_min_speed);
    const double cap = std::abs(kappa) > 1e-9 ? std::min(cfg.free_cap, kPi / std::abs(kappa)) : cfg.free_cap;
    const int n = static_cast<int>(std::floor(cap / cfg.free_step));
    double fx = p.robot.x, fy = p.robot.y, fth = p.robot.theta;
    free = n * cfg.free_step;
    for (int k = 1; k <= n; ++k) {
      fth += kappa * cfg.free_step;
      fx += std::cos(fth) * cfg.free_step;
      fy += std::sin(fth) * cfg.free_step;
      const double t = std::min(k * cfg.free_step / std::max(u.v, cfg.free_min_speed), cfg.horizon);
      if (detail::dwa_gap(p, objects, fx, fy, t) - cfg.safety_margin <= 0.0) {
        free = (k - 1) * cfg.free_step;
        break;
      }
    }
  }

  const double heading_err = std::abs(wrap_angle(std::atan2(p.goal.y - y, p.goal.x - x) - th));
  const double clear_cost = clearance > 0.0 ? cfg.clearance_cap - clearance : cfg.clearance_cap - 10.0 * clearance;
  c.cost = cfg.w_heading * heading_err + cfg.w_free * (1.0 - free / cfg.free_cap) + cfg.w_clearance * clear_cost +
           cfg.w_speed * (Command::v_max - u.v);
  return c;
}

/// Ordering used to pick the winner: admissible first, then lower cost, then
/// higher v, then smaller |w|. Remaining exact ties keep the earlier sample.
inline bool dwa_better(const DwaCandidate& a, const DwaCandidate& b) {
  if (a.admissible != b.admissible) return a.admissible;
  if (a.cost != b.cost) return a.cost < b.cost;
  if (a.u.v != b.u.v) return a.u.v > b.u.v;
  return std::abs(a.u.w) < std::abs(b.u.w);
}

/// Returns the best admissible command, or (0, 0) if every arc collides.
/// Objects that cannot come within reach of any arc are skipped.
inline Command dwa_plan(const DwaProblem& p, const DwaConfig& cfg = {}) {
  const auto window = dwa_window(p.robot, cfg);
  double v_top = 0.0;
  for (const auto& u : window) v_top = std::max(v_top, u.v);
  const double reach = std::max(v_top * cfg.horizon, cfg.free_cap) + WorldConstants::robot_radius +
                       cfg.safety_margin + cfg.clearance_cap;
  std::vector<const DwaObject*> relevant;
  for (const auto& o : p.objects) {
    const double travel = o.velocity.norm() * cfg.horizon;
    const double gap = (o.shape.center - Vec2{p.robot.x, p.robot.y}).norm() - o.shape.bounding_radius() - travel;
    if (gap < reach) relevant.push_back(&o);
  }
  DwaCandidate best;
  for (const auto& u : window) {
    const auto c = dwa_evaluate(p, relevant, u, cfg);
    if (dwa_better(c, best)) best = c;
  }
  return best.admissible ? best.u : Command{};
}

/// Shortest-path distance to the goal line over a grid of the static map,
/// with obstacles grown by the robot radius plus `inflation`. The heading
/// term then aims at a point `lookahead` metres along that path instead of
/// the goal itself, so the planner does not drive into dead ends.
class GoalField {
 public:
  static constexpr double res = 0.1;

  explicit GoalField(const Scene& scene, double inflation = 0.1) : width_(scene.corridor_width), goal_x_(scene.goal_x) {
    nx_ = static_cast<int>(std::ceil(scene.corridor_length / res)) + 1;
    ny_ = static_cast<int>(std::floor(width_ / res)) + 1;
    const double grow = WorldConstants::robot_radius + inflation;
    free_.assign(static_cast<std::size_t>(nx_) * ny_, 0);
    for (int ix = 0; ix < nx_; ++ix)
      for (int iy = 0; iy < ny_; ++iy) {
        const Vec2 c = cell(ix, iy);
        bool ok = c.y >= grow && c.y <= width_ - grow;
        for (const auto& o : scene.obstacles)
          if (ok && std::abs(o.center.x - c.x) <= o.bounding_radius() + grow) ok = o.distance(c) >= grow;
        free_[idx(ix, iy)] = ok;
      }
    dist_.assign(free_.size(), kInf);
    using Item = std::pair<double, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
    for (int ix = 0; ix < nx_; ++ix)
      for (int iy = 0; iy < ny_; ++iy)
        if (free_[idx(ix, iy)] && cell(ix, iy).x >= goal_x_) {
          dist_[idx(ix, iy)] = 0.0;
          open.emplace(0.0, idx(ix, iy));
        }
    while (!open.empty()) {
      const auto [d, i] = open.top();
      open.pop();
      if (d > dist_[i]) continue;
      const int ix = static_cast<int>(i) / ny_, iy = static_cast<int>(i) % ny_;
      for (auto [dx, dy, len] : kSteps) {
        const int jx = ix + dx, jy = iy + dy;
        if (jx < 0 || jy < 0 || jx >= nx_ || jy >= ny_ || !free_[idx(jx, jy)]) continue;
        const double nd = d + len * res;
        if (nd < dist_[idx(jx, jy)]) {
          dist_[idx(jx, jy)] = nd;
          open.emplace(nd, idx(jx, jy));
        }
      }
    }
  }

  /// Point `lookahead` metres down the shortest path from `from`; the goal
  /// itself if no free cell near `from` connects to it.
  Vec2 carrot(Vec2 from, double lookahead) const {
    int ix = std::clamp(static_cast<int>(std::lround(from.x / res)), 0, nx_ - 1);
    int iy = std::clamp(static_cast<int>(std::lround(from.y / res)), 0, ny_ - 1);
    if (dist_[idx(ix, iy)] == kInf) {
      // inside the inflated zone: start from the nearest reachable cell
      double best = kInf;
      int bx = -1, by = -1;
      for (int jx = std::max(0, ix - 6); jx <= std::min(nx_ - 1, ix + 6); ++jx)
        for (int jy = 0; jy < ny_; ++jy) {
          if (dist_[idx(jx, jy)] == kInf) continue;
          const double d = (cell(jx, jy) - from).norm();
          if (d < best) best = d, bx = jx, by = jy;
        }
      if (bx < 0) return {goal_x_, width_ / 2.0};
      ix = bx;
      iy = by;
    }
    double walked = 0.0;
    while (walked < lookahead && dist_[idx(ix, iy)] > 0.0) {
      int bx = ix, by = iy;
      double best = dist_[idx(ix, iy)], step = 0.0;
      for (auto [dx, dy, len] : kSteps) {
        const int jx = ix + dx, jy = iy + dy;
        if (jx < 0 || jy < 0 || jx >= nx_ || jy >= ny_) continue;
        if (dist_[idx(jx, jy)] < best) best = dist_[idx(jx, jy)], bx = jx, by = jy, step = len * res;
      }
      if (bx == ix && by == iy) break;
      ix = bx;
      iy = by;
      walked += step;
    }
    if (dist_[idx(ix, iy)] == 0.0) return {std::max(cell(ix, iy).x, from.x + lookahead), cell(ix, iy).y};
    return cell(ix, iy);
  }

 private:
  static constexpr double kInf = std::numeric_limits<double>::infinity();
  struct Step {
    int dx, dy;
    double len;
  };
  static constexpr double kSqrt2 = 1.4142135623730951;
  static constexpr Step kSteps[8] = {{1, 0, 1.0},    {-1, 0, 1.0},    {0, 1, 1.0},     {0, -1, 1.0},
                                     {1, 1, kSqrt2}, {1, -1, kSqrt2}, {-1, 1, kSqrt2}, {-1, -1, kSqrt2}};

  Vec2 cell(int ix, int iy) const { return {ix * res, iy * res}; }
  std::size_t idx(int ix, int iy) const { return static_cast<std::size_t>(ix) * ny_ + iy; }

  double width_, goal_x_;
  int nx_ = 0, ny_ = 0;
  std::vector<char> free_;
  std::vector<double> dist_;
};

/// Navigator adapter around dwa_plan. The goal field is built from the
/// privileged static map on the first call of each episode.
class DwaNavigator : public NavPolicy {
 public:
  explicit DwaNavigator(DwaConfig cfg = {}, double lookahead = 3.5) : cfg_(cfg), lookahead_(lookahead) {}
  void reset(std::uint64_t) override { field_.reset(); }
  Command act(const NavContext& ctx) override {
    if (!field_) field_.emplace(ctx.scene);
    auto p = dwa_problem(ctx.scene, ctx.robot);
    p.goal = field_->carrot({ctx.robot.x, ctx.robot.y}, lookahead_);
    return dwa_plan(p, cfg_);
  }
  std::string name() const override { return "dwa"; }

 private:
  DwaConfig cfg_;
  double lookahead_;
  std::optional<GoalField> field_;
};

}  // namespace hiernav::controllers
