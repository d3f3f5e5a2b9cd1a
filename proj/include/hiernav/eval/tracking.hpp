#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "hiernav/controllers/pd.hpp"
#include "hiernav/core/parallel.hpp"
#include "hiernav/eval/seeds.hpp"
#include "hiernav/hierarchy.hpp"

namespace hiernav::eval {

enum class TrackSuite { XLinear, XSine, XStep, SineTraj, ZigZag };

inline constexpr std::array<TrackSuite, 5> kAllSuites{TrackSuite::XLinear, TrackSuite::XSine, TrackSuite::XStep,
                                                      TrackSuite::SineTraj, TrackSuite::ZigZag};

inline std::string_view to_string(TrackSuite s) {
  switch (s) {
    case TrackSuite::XLinear: return "xlinear";
    case TrackSuite::XSine: return "xsine";
    case TrackSuite::XStep: return "xstep";
    case TrackSuite::SineTraj: return "sinetraj";
    case TrackSuite::ZigZag: return "zigzag";
  }
  return "xlinear";
}

inline TrackSuite parse_suite(std::string_view s) {
  for (auto t : kAllSuites)
    if (to_string(t) == s) return t;
  throw ConfigError("unknown suite '" + std::string(s) + "' (expected xlinear|xsine|xstep|sinetraj|zigzag)");
}

struct TrackingConstants {
  static constexpr double duration = 30.0;
  static constexpr int trials = 20;
  static constexpr double error_limit = 1.0;
  static constexpr double period = 10.0;       // sine suites
  static constexpr double step_dwell = 10.0;   // XStep
  static constexpr double zigzag_half = 5.0;   // ZigZag alternation
};

/// Reference speed (m/s) and direction (rad) of a suite at time t.
inline double suite_speed(TrackSuite s, double t) {
  switch (s) {
    case TrackSuite::XSine: return 0.7 - 0.3 * std::cos(2 * kPi * t / TrackingConstants::period);
    case TrackSuite::XStep: {
      const int block = std::min(2, static_cast<int>(std::floor(t / TrackingConstants::step_dwell)));
      static constexpr double speeds[3] = {0.5, 0.7, 1.0};
      return speeds[std::max(0, block)];
    }
    default: return 0.7;
  }
}

inline double suite_yaw(TrackSuite s, double t) {
  switch (s) {
    case TrackSuite::SineTraj: return 0.7 * (1.0 - std::cos(2 * kPi * t / TrackingConstants::period));
    case TrackSuite::ZigZag:
      return static_cast<long>(std::floor(t / TrackingConstants::zigzag_half)) % 2 == 0 ? 0.4 : -0.4;
    default: return 0.0;
  }
}

/// Reference trajectory: dense positions at the base tick plus 1 Hz set points.
struct Reference {
  TrackSuite suite = TrackSuite::XLinear;
  std::vector<Vec2> dense;   // dense[k] = position at k * kTickDt
  std::vector<double> arc;   // cumulative arc length at the same instants
  std::vector<controllers::SetpointFollower::Sample> setpoints;

  Vec2 at_tick(std::size_t k) const { return dense[std::min(k, dense.size() - 1)]; }
};

/// Integrates the suite's speed/direction profile (midpoint rule, 32 substeps
/// per tick). The trial seed is accepted for interface symmetry; the streams
/// are deterministic and identical across trials.
inline Reference make_reference(TrackSuite suite, std::uint64_t /*trial_seed*/ = 0,
                                double duration = TrackingConstants::duration + 2.0) {
  Reference r;
  r.suite = suite;
  const int ticks = static_cast<int>(std::ceil(duration * kTickHz));
  constexpr int sub = 32;
  const double h = kTickDt / sub;
  Vec2 p;
  double s = 0.0;
  r.dense.push_back(p);
  r.arc.push_back(0.0);
  for (int k = 0; k < ticks; ++k) {
    for (int j = 0; j < sub; ++j) {
      const double tm = k * kTickDt + (j + 0.5) * h;
      const double v = suite_speed(suite, tm), psi = suite_yaw(suite, tm);
      p += Vec2{std::cos(psi), std::sin(psi)} * (v * h);
      s += v * h;
    }
    r.dense.push_back(p);
    r.arc.push_back(s);
  }
  for (int sec = 0; sec * kTickHz < static_cast<int>(r.dense.size()); ++sec)
    r.setpoints.push_back({static_cast<double>(sec), r.dense[static_cast<std::size_t>(sec * kTickHz)]});
  return r;
}

struct TrialResult {
  std::uint64_t seed = 0;
  double mean_error = 0.0;      // time-aligned Euclidean position error
  double max_error = 0.0;
  double mean_vel_error = 0.0;  // |v - v_ref|
  double drift_integral = 0.0;  // integral of |v_lat| dt
  double mean_abs_v_cmd_error = 0.0;  // |v - v_cmd|
  bool fell = false;
  bool success = false;
  int ticks = 0;
};

struct TrackOptions {
  int nav_period = 4;
  double duration = TrackingConstants::duration;
};

/// One trial: PD set-point commands at the navigation rate drive `low` for
/// `duration` seconds from rest at the origin.
inline TrialResult run_track_trial(LowLevel& low, const Reference& ref, std::uint64_t trial_seed,
                                   const TrackOptions& opt = {}) {
  TrialResult tr;
  tr.seed = trial_seed;
  low.reset(trial_seed);
  controllers::SetpointFollower follower(ref.setpoints);
  RobotState s;
  Command u;
  const int total = static_cast<int>(std::lround(opt.duration * kTickHz));
  double err_sum = 0.0, vel_sum = 0.0, cmd_sum = 0.0;
  for (int k = 0; k < total; ++k) {
    if (k % opt.nav_period == 0) u = follower.command(k * kTickDt, s);
    const bool fell = low.step(s, u);
    const double e = (Vec2{s.x, s.y} - ref.at_tick(k + 1)).norm();
    const double v_ref = (ref.arc[std::min<std::size_t>(k + 1, ref.arc.size() - 1)] - ref.arc[k]) / kTickDt;
    err_sum += e;
    vel_sum += std::abs(s.v - v_ref);
    cmd_sum += std::abs(s.v - u.v);
    tr.max_error = std::max(tr.max_error, e);
    tr.drift_integral += std::abs(s.v_lat) * kTickDt;
    ++tr.ticks;
    if (fell) {
      tr.fell = true;
      break;
    }
  }
  tr.mean_error = err_sum / tr.ticks;
  tr.mean_vel_error = vel_sum / tr.ticks;
  tr.mean_abs_v_cmd_error = cmd_sum / tr.ticks;
  tr.success = !tr.fell && tr.max_error <= TrackingConstants::error_limit;
  return tr;
}

struct SuiteResult {
  std::string tracker;
  TrackSuite suite = TrackSuite::XLinear;
  std::vector<TrialResult> trials;

  double success_rate() const {
    double n = 0.0;
    for (const auto& t : trials) n += t.success ? 1.0 : 0.0;
    return trials.empty() ? 0.0 : n / trials.size();
  }
  double mean_error() const {
    double s = 0.0;
    for (const auto& t : trials) s += t.mean_error;
    return trials.empty() ? 0.0 : s / trials.size();
  }
  double std_error() const {
    const double m = mean_error();
    double v = 0.0;
    for (const auto& t : trials) v += sq(t.mean_error - m);
    return trials.empty() ? 0.0 : std::sqrt(v / trials.size());
  }
  double mean_drift() const {
    double s = 0.0;
    for (const auto& t : trials) s += t.drift_integral;
    return trials.empty() ? 0.0 : s / trials.size();
  }
};

using LowLevelFactory = std::function<std::unique_ptr<LowLevel>()>;

inline SuiteResult run_track_suite(const std::string& tracker, const LowLevelFactory& make_low, TrackSuite suite,
                                   std::span<const std::uint64_t> trial_seeds = kTrackTrialSeeds, int workers = 1,
                                   const TrackOptions& opt = {}) {
  make_low();
  SuiteResult res;
  res.tracker = tracker;
  res.suite = suite;
  res.trials.resize(trial_seeds.size());
  const Reference ref = make_reference(suite);
  parallel_for(trial_seeds.size(), workers, [&](std::size_t i) {
    auto low = make_low();
    res.trials[i] = run_track_trial(*low, ref, trial_seeds[i], opt);
  });
  return res;
}

}  // namespace hiernav::eval
