#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hiernav/core/errors.hpp"
#include "hiernav/core/math.hpp"
#include "hiernav/plant.hpp"
#include "hiernav/sensing.hpp"
#include "hiernav/world.hpp"

namespace hiernav {

inline double quantize_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

/// Velocity command passed from the navigator to the gait level.
struct Command {
  double v = 0.0;  // m/s, [0, 1]
  double w = 0.0;  // rad/s, [-1.5, 1.5]

  static constexpr double v_min = 0.0;
  static constexpr double v_max = 1.0;
  static constexpr double w_max = 1.5;

  // Clipped to the command box and rounded to float32, so recorded commands
  // replay bit-exactly.
  Command clipped() const { return {quantize_f32(clip(v, v_min, v_max)), quantize_f32(clip(w, -w_max, w_max))}; }
  bool finite() const { return std::isfinite(v) && std::isfinite(w); }
  bool operator==(const Command&) const = default;
};

// ---------------------------------------------------------------------------
// History buffer B_t

struct HistoryEntry {
  Command u;
  std::array<double, 6> q{};  // v, omega, v_lat, instability, sin(theta), cos(theta)
  GaitAction a;               // previous action
};

inline std::array<double, 6> proprio_slice(const RobotState& s) {
  return {s.v, s.omega, s.v_lat, s.instability, std::sin(s.theta), std::cos(s.theta)};
}

class HistoryBuffer {
 public:
  static constexpr int T = 15;
  static constexpr int entries = T + 1;
  static constexpr int entry_width = 2 + 6 + 2;
  static constexpr int feature_size = entries * entry_width;

  void push(const Command& u, const RobotState& q, const GaitAction& a) { push({u, proprio_slice(q), a}); }

  void push(const HistoryEntry& e) {
    ring_[head_] = e;
    head_ = (head_ + 1) % entries;
    if (count_ < entries) ++count_;
  }

  void clear() { *this = HistoryBuffer{}; }

  // Chronological order, oldest first; index entries-1 is the newest.
  const HistoryEntry& at(int i) const { return ring_[(head_ + i) % entries]; }
  int filled() const { return count_; }

  template <class S>
  void flatten(std::span<S> out) const {
    for (int i = 0; i < entries; ++i) {
      const auto& e = at(i);
      S* p = out.data() + i * entry_width;
      p[0] = static_cast<S>(e.u.v);
      p[1] = static_cast<S>(e.u.w);
      for (int k = 0; k < 6; ++k) p[2 + k] = static_cast<S>(e.q[k]);
      p[8] = static_cast<S>(e.a.forward);
      p[9] = static_cast<S>(e.a.turn);
    }
  }

  std::vector<float> features() const {
    std::vector<float> f(feature_size);
    flatten<float>(f);
    return f;
  }

 private:
  std::array<HistoryEntry, entries> ring_{};
  int head_ = 0;
  int count_ = 0;
};

// ---------------------------------------------------------------------------
// Policy interfaces

/// What a navigator may look at. Learned navigators read only `obs`;
/// privileged planners may read the true scene.
struct NavContext {
  const Observation& obs;
  const Scene& scene;
  const RobotState& robot;
};

class NavPolicy {
 public:
  virtual ~NavPolicy() = default;
  virtual void reset(std::uint64_t /*episode_seed*/) {}
  virtual Command act(const NavContext& ctx) = 0;
  virtual std::string name() const = 0;
};

/// Low-level stack that turns a held command into body motion for one tick
/// (gait policy + plant, MPC + plant, or an ideal integrator).
class LowLevel {
 public:
  virtual ~LowLevel() = default;
  virtual void reset(std::uint64_t episode_seed) = 0;
  /// Returns true if the body fell during the tick.
  virtual bool step(RobotState& state, const Command& u) = 0;
  virtual GaitAction last_action() const { return {}; }
  /// Enough to rebuild an identical low level for replay.
  virtual nlohmann::json spec() const = 0;
};

inline std::uint64_t episode_seed_for(const Scene& scene) { return derive_key(scene.seed, 0xe915); }

// ---------------------------------------------------------------------------
// Episodes

struct TickRecord {
  float t, x, y, theta, v, omega, v_lat, instability, v_cmd, w_cmd, a_f, a_t;
};
static_assert(sizeof(TickRecord) == 12 * sizeof(float));

inline const std::vector<std::string>& tick_record_fields() {
  static const std::vector<std::string> f{"t",     "x",           "y",     "theta", "v",   "omega",
                                          "v_lat", "instability", "v_cmd", "w_cmd", "a_f", "a_t"};
  return f;
}

struct Trajectory {
  nlohmann::json header;
  std::vector<TickRecord> ticks;
};

struct EpisodeResult {
  EpisodeStatus status;
  RobotState final_state;
  Trajectory trajectory;
  std::string diagnostic;
};

struct EpisodeOptions {
  int nav_period = 4;  // base ticks per navigator call (38/4 = 9.5 Hz)
  int limit_ticks = WorldConstants::episode_limit_ticks;
  bool keep_trajectory = true;
};

using NavRecorder = std::function<void(const Observation&, const Command&, double t)>;

namespace detail {

inline TickRecord make_record(std::uint64_t tick, const RobotState& s, const Command& u, const GaitAction& a) {
  return {static_cast<float>(tick * kTickDt), static_cast<float>(s.x),     static_cast<float>(s.y),
          static_cast<float>(s.theta),        static_cast<float>(s.v),     static_cast<float>(s.omega),
          static_cast<float>(s.v_lat),        static_cast<float>(s.instability), static_cast<float>(u.v),
          static_cast<float>(u.w),            static_cast<float>(a.forward),     static_cast<float>(a.turn)};
}

inline nlohmann::json episode_header(const Scene& scene, const LowLevel& low, const std::string& nav,
                                     const EpisodeOptions& opt) {
  nlohmann::json h;
  h["format"] = "hiernav-trajectory";
  h["version"] = 1;
  h["fields"] = tick_record_fields();
  h["record_bytes"] = sizeof(TickRecord);
  h["endianness"] = "little";
  h["scene"] = {{"seed", scene.seed}, {"difficulty", std::string(to_string(scene.difficulty))}};
  h["low_level"] = low.spec();
  h["nav"] = nav;
  h["nav_period"] = opt.nav_period;
  h["limit_ticks"] = opt.limit_ticks;
  return h;
}

inline void finish_header(EpisodeResult& r) {
  auto& h = r.trajectory.header;
  h["status"] = std::string(to_string(r.status.state));
  h["travel_distance"] = r.status.travel_distance;
  h["ticks"] = r.status.ticks;
  h["final_pose"] = {r.final_state.x, r.final_state.y, r.final_state.theta};
  if (!r.diagnostic.empty()) h["diagnostic"] = r.diagnostic;
}

}  // namespace detail

/// Runs one episode: the navigator is called every `nav_period` base ticks and
/// its command is held in between; the low level advances every tick.
inline EpisodeResult run_episode(Scene scene, NavPolicy& nav, LowLevel& low, const NavRecorder& recorder = {},
                                 const EpisodeOptions& opt = {}) {
  EpisodeResult r;
  RobotState state = start_state(scene);
  const auto seed = episode_seed_for(scene);
  low.reset(seed);
  nav.reset(seed);
  if (opt.keep_trajectory) r.trajectory.header = detail::episode_header(scene, low, nav.name(), opt);

  Command u;
  for (std::uint64_t tick = 0;; ++tick) {
    if (tick % static_cast<std::uint64_t>(opt.nav_period) == 0) {
      const Observation obs = observe(scene, state);
      const Command raw = nav.act({obs, scene, state});
      if (!raw.finite()) {
        r.status.state = EpisodeState::FailAborted;
        r.diagnostic = "navigator '" + nav.name() + "' produced a non-finite command at t=" +
                       std::to_string(tick * kTickDt);
        break;
      }
      u = raw.clipped();
      if (recorder) recorder(obs, u, tick * kTickDt);
    }
    const bool fell = low.step(state, u);
    const GaitAction a = low.last_action();
    if (!std::isfinite(state.x) || !std::isfinite(state.y) || !std::isfinite(a.forward) || !std::isfinite(a.turn)) {
      r.status.state = EpisodeState::FailAborted;
      r.diagnostic = "low level produced a non-finite state/action at t=" + std::to_string(tick * kTickDt);
      break;
    }
    r.status = step_world(scene, state, r.status, opt.limit_ticks);
    if (fell && r.status.state == EpisodeState::Running) r.status.state = EpisodeState::FailFall;
    if (opt.keep_trajectory) r.trajectory.ticks.push_back(detail::make_record(tick, state, u, a));
    if (r.status.terminal()) break;
  }
  r.final_state = state;
  if (opt.keep_trajectory) detail::finish_header(r);
  return r;
}

/// Re-simulates an episode from a per-tick command sequence instead of a
/// navigator. Used for replay of recorded runs.
inline EpisodeResult replay_episode(Scene scene, LowLevel& low, std::span<const Command> per_tick,
                                    int limit_ticks = WorldConstants::episode_limit_ticks) {
  EpisodeResult r;
  RobotState state = start_state(scene);
  low.reset(episode_seed_for(scene));
  for (std::uint64_t tick = 0;; ++tick) {
    const Command u = tick < per_tick.size() ? per_tick[tick] : (per_tick.empty() ? Command{} : per_tick.back());
    const bool fell = low.step(state, u);
    r.status = step_world(scene, state, r.status, limit_ticks);
    if (fell && r.status.state == EpisodeState::Running) r.status.state = EpisodeState::FailFall;
    r.trajectory.ticks.push_back(detail::make_record(tick, state, u, low.last_action()));
    if (r.status.terminal()) break;
  }
  r.final_state = state;
  return r;
}

// ---------------------------------------------------------------------------
// Trajectory files: one JSON header line, then little-endian float32 records.

namespace detail {

inline std::uint32_t to_le(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
}

}  // namespace detail

inline void write_trajectory(const std::string& path, const Trajectory& traj) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  nlohmann::json h = traj.header;
  h["records"] = traj.ticks.size();
  out << h.dump() << '\n';
  for (const auto& rec : traj.ticks) {
    const auto* f = reinterpret_cast<const float*>(&rec);
    for (int k = 0; k < 12; ++k) {
      const auto bits = detail::to_le(std::bit_cast<std::uint32_t>(f[k]));
      out.write(reinterpret_cast<const char*>(&bits), 4);
    }
  }
  if (!out) throw FormatError("write failed: " + path);
}

inline Trajectory read_trajectory(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open trajectory " + path);
  std::string line;
  std::getline(in, line);
  Trajectory traj;
  try {
    traj.header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("trajectory header is not JSON: " + std::string(e.what()));
  }
  if (traj.header.value("format", "") != "hiernav-trajectory")
    throw FormatError(path + " is not a trajectory file");
  const auto n = traj.header.at("records").get<std::size_t>();
  traj.ticks.resize(n);
  for (auto& rec : traj.ticks) {
    auto* f = reinterpret_cast<float*>(&rec);
    for (int k = 0; k < 12; ++k) {
      std::uint32_t bits = 0;
      in.read(reinterpret_cast<char*>(&bits), 4);
      f[k] = std::bit_cast<float>(detail::to_le(bits));
    }
  }
  if (!in) throw FormatError("trajectory " + path + " is truncated");
  return traj;
}

inline std::vector<Command> trajectory_commands(const Trajectory& traj) {
  std::vector<Command> cmds;
  cmds.reserve(traj.ticks.size());
  for (const auto& r : traj.ticks) cmds.push_back({r.v_cmd, r.w_cmd});
  return cmds;
}

}  // namespace hiernav
