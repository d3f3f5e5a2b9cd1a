#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "hiernav/hierarchy.hpp"
#include "hiernav/il/demos.hpp"
#include "hiernav/lowlevel.hpp"

namespace hiernav::teleop {

inline constexpr int kProtocolVersion = 1;

struct TeleopConfig {
  Difficulty difficulty = Difficulty::Easy;
  std::uint64_t seed = 1;       // first scene; each reset moves to seed + 1
  bool empty_corridor = false;  // no obstacles or pedestrians
  int nav_period = 4;           // base ticks per applied command (9.5 Hz)
  int broadcast_period = 4;     // base ticks per state message
  double hold_seconds = 0.5;    // hold the last command this long without input
  double decay_seconds = 1.0;   // then ramp linearly to a stop over this long
  int limit_ticks = WorldConstants::episode_limit_ticks;
  bool keep_all = false;        // operator override: keep failed episodes too
  std::filesystem::path out_dir;  // empty: recording disabled
  nlohmann::json low_level = {{"kind", "ideal"}};

  nlohmann::json to_json() const {
    return {{"difficulty", std::string(to_string(difficulty))},
            {"seed", seed},
            {"empty_corridor", empty_corridor},
            {"nav_period", nav_period},
            {"broadcast_period", broadcast_period},
            {"hold_seconds", hold_seconds},
            {"decay_seconds", decay_seconds},
            {"limit_ticks", limit_ticks},
            {"keep_all", keep_all},
            {"out_dir", out_dir.string()},
            {"low_level", low_level}};
  }
};

/// Outcome of handling one client message. `reply` is sent back to that
/// client only; the session keeps running either way.
struct MessageResult {
  bool accepted = true;
  std::optional<nlohmann::json> reply;
};

inline nlohmann::json error_message(const std::string& what) { return {{"type", "error"}, {"message", what}}; }

/// One simulated teleoperation session. Owns the tick clock: network input
/// lands in a latest-value mailbox and takes effect at tick boundaries, so
/// the simulation never depends on wall time.
class Session {
 public:
  explicit Session(TeleopConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.nav_period < 1 || cfg_.broadcast_period < 1) throw ConfigError("teleop: periods must be positive");
    start_episode(cfg_.seed);
  }

  const TeleopConfig& config() const { return cfg_; }
  const Scene& scene() const { return scene_; }
  const RobotState& robot() const { return state_; }
  const EpisodeStatus& status() const { return status_; }
  std::uint64_t tick() const { return tick_; }
  std::uint64_t episode_seed() const { return seed_; }
  bool recording() const { return recording_; }
  bool paused() const { return !pause_reason_.empty(); }
  const std::string& pause_reason() const { return pause_reason_; }
  const Command& applied() const { return applied_; }
  const Observation& last_observation() const { return last_obs_; }
  /// Files written for finished episodes, in order.
  const std::vector<std::string>& written() const { return written_; }

  // -------------------------------------------------------------------------
  // Input

  /// Latest-value mailbox: a newer command overwrites an unconsumed one.
  void post_command(double v, double w) { mailbox_ = Command{v, w}; }

  void set_recording(bool on) { recording_ = on; }

  /// Finishes the current episode (flushing any recording) and starts the
  /// next scene. A failed flush leaves the new episode paused; the next reset resumes.
  void reset() {
    pause_reason_.clear();
    finish_episode();
    start_episode(seed_ + 1);
  }

  /// Parses and applies one client message. Only the driver may steer.
  MessageResult handle_message(const std::string& text, bool driver = true) {
    nlohmann::json m;
    try {
      m = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception&) {
      return reject("message is not JSON");
    }
    if (!m.is_object() || !m.contains("type") || !m["type"].is_string()) return reject("message needs a string 'type'");
    const auto type = m["type"].get<std::string>();
    if (type == "hello") {
      if (m.value("protocol", kProtocolVersion) != kProtocolVersion)
        return reject("protocol " + m["protocol"].dump() + " not supported (server speaks " +
                      std::to_string(kProtocolVersion) + ")");
      return {};
    }
    if (!driver) return reject("observer clients cannot send '" + type + "'");
    if (type == "cmd") {
      if (!m.contains("v") || !m.contains("w") || !m["v"].is_number() || !m["w"].is_number())
        return reject("cmd needs numeric 'v' and 'w'");
      const double v = m["v"].get<double>(), w = m["w"].get<double>();
      if (!std::isfinite(v) || !std::isfinite(w)) return reject("cmd values must be finite");
      post_command(v, w);
      return {};
    }
    if (type == "reset") {
      reset();
      return {};
    }
    if (type == "record") {
      if (!m.contains("on") || !m["on"].is_boolean()) return reject("record needs boolean 'on'");
      set_recording(m["on"].get<bool>());
      return {};
    }
    return reject("unknown message type '" + type + "'");
  }

  // -------------------------------------------------------------------------
  // Clock

  /// Advances one base tick. Returns true if a state message is due.
  /// Does nothing once the episode is over or the session is paused.
  bool step() {
    if (status_.terminal() || paused()) return false;
    if (mailbox_) {
      held_ = mailbox_->clipped();
      last_input_tick_ = tick_;
      have_input_ = true;
      mailbox_.reset();
    }
    const bool nav_tick = tick_ % static_cast<std::uint64_t>(cfg_.nav_period) == 0;
    if (nav_tick) {
      last_obs_ = observe(scene_, state_);
      obs_time_ = static_cast<double>(tick_) * kTickDt;
      applied_ = watchdog_command();
      // nothing is recorded until the driver has expressed an intent
      if (recording_ && have_input_) demo_.records.push_back({static_cast<double>(tick_) * kTickDt, last_obs_, applied_});
    }
    const bool fell = low_->step(state_, applied_);
    status_ = step_world(scene_, state_, status_, cfg_.limit_ticks);
    if (fell && status_.state == EpisodeState::Running) status_.state = EpisodeState::FailFall;
    traj_.ticks.push_back(detail::make_record(tick_, state_, applied_, low_->last_action()));
    const bool due = tick_ % static_cast<std::uint64_t>(cfg_.broadcast_period) == 0;
    ++tick_;
    if (status_.terminal()) finish_episode();
    return due || status_.terminal();
  }

  /// Command applied at the current navigation tick: the last input held
  /// for hold_seconds, then scaled linearly down to zero over decay_seconds.
  Command watchdog_command() const {
    if (!have_input_) return {};
    const double age = static_cast<double>(tick_ - last_input_tick_) * kTickDt;
    if (age <= cfg_.hold_seconds + 1e-12) return held_;
    const double f = std::max(0.0, 1.0 - (age - cfg_.hold_seconds) / cfg_.decay_seconds);
    return Command{held_.v * f, held_.w * f}.clipped();
  }

  // -------------------------------------------------------------------------
  // Messages

  nlohmann::json hello_message(bool driver) const {
    return {{"type", "hello"},
            {"protocol", kProtocolVersion},
            {"role", driver ? "driver" : "observer"},
            {"difficulty", std::string(to_string(cfg_.difficulty))},
            {"seed", seed_},
            {"tick_hz", kTickHz},
            {"broadcast_hz", kTickHz / cfg_.broadcast_period},
            {"corridor", {{"width", scene_.corridor_width}, {"length", scene_.corridor_length}}},
            {"goal_x", scene_.goal_x}};
  }

  /// The observation in this message is the one recorded at the same tick.
  nlohmann::json state_message() const {
    nlohmann::json peds = nlohmann::json::array(), obst = nlohmann::json::array();
    for (const auto& p : scene_.pedestrians)
      peds.push_back({{"x", p.position.x}, {"y", p.position.y}, {"r", p.radius}});
    for (const auto& o : scene_.obstacles)
      obst.push_back({{"shape", o.shape == ObstacleShape::Circle ? "circle" : "box"},
                      {"x", o.center.x},
                      {"y", o.center.y},
                      {"ex", o.extent.x},
                      {"ey", o.extent.y}});
    return {{"type", "state"},
            {"t", obs_time_},
            {"tick", tick_},
            {"seed", seed_},
            {"robot",
             {{"x", state_.x}, {"y", state_.y}, {"theta", state_.theta}, {"v", state_.v}, {"omega", state_.omega}}},
            {"ranges", last_obs_.ranges},
            {"heading", last_obs_.heading},
            {"goal_bearing", last_obs_.goal_bearing},
            {"cmd", {applied_.v, applied_.w}},
            {"pedestrians", peds},
            {"obstacles", obst},
            {"status", std::string(to_string(status_.state))},
            {"recording", recording_},
            {"travel_distance", status_.travel_distance}};
  }

 private:
  MessageResult reject(const std::string& why) { return {false, error_message(why)}; }

  void start_episode(std::uint64_t seed) {
    seed_ = seed;
    scene_ = generate_scene(seed, cfg_.difficulty);
    if (cfg_.empty_corridor) {
      scene_.obstacles.clear();
      scene_.pedestrians.clear();
    }
    state_ = start_state(scene_);
    status_ = {};
    tick_ = 0;
    low_ = make_low_level(cfg_.low_level);
    low_->reset(episode_seed_for(scene_));
    mailbox_.reset();
    held_ = applied_ = {};
    have_input_ = false;
    last_input_tick_ = 0;
    last_obs_ = observe(scene_, state_);
    obs_time_ = 0.0;
    demo_ = {};
    demo_.source = il::DemoSource::HumanTeleop;
    demo_.scene_seed = seed;
    demo_.difficulty = cfg_.difficulty;
    traj_ = {};
    EpisodeOptions eo;
    eo.nav_period = cfg_.nav_period;
    eo.limit_ticks = cfg_.limit_ticks;
    traj_.header = detail::episode_header(scene_, *low_, "teleop", eo);
    traj_.header["scene"]["empty"] = cfg_.empty_corridor;
    flushed_ = false;
  }

  /// Writes the recording of the current episode once. A write failure
  /// pauses the session with the reason.
  void finish_episode() {
    if (flushed_) return;
    flushed_ = true;
    if (demo_.records.empty() || cfg_.out_dir.empty()) return;
    try {
      std::filesystem::create_directories(cfg_.out_dir);
      std::vector<nlohmann::json> entries;
      if (std::filesystem::exists(cfg_.out_dir / il::kManifestName)) {
        std::ifstream in(cfg_.out_dir / il::kManifestName);
        const auto m = nlohmann::json::parse(in);
        if (m.value("format", "") != "hiernav-demos") throw FormatError("existing manifest is not a demo manifest");
        for (const auto& e : m.at("trajectories")) entries.push_back(e);
      }
      char stem[32];
      std::snprintf(stem, sizeof stem, "teleop_%04zu", entries.size());
      demo_.name = std::string(stem) + ".jsonl";
      demo_.status = std::string(to_string(status_.state));
      demo_.keep = status_.success() || cfg_.keep_all;
      il::write_trajectory_jsonl(cfg_.out_dir / demo_.name, demo_);
      EpisodeResult r;
      r.status = status_;
      r.final_state = state_;
      r.trajectory = std::move(traj_);
      detail::finish_header(r);
      write_trajectory((cfg_.out_dir / (std::string(stem) + ".traj")).string(), r.trajectory);
      auto entry = il::manifest_entry(demo_);
      entry["trajectory"] = std::string(stem) + ".traj";
      entries.push_back(entry);
      il::write_manifest(cfg_.out_dir, entries);
      written_.push_back(demo_.name);
    } catch (const std::exception& e) {
      pause_reason_ = std::string("recording failed: ") + e.what();
    }
  }

  TeleopConfig cfg_;
  Scene scene_;
  RobotState state_;
  EpisodeStatus status_;
  std::unique_ptr<LowLevel> low_;
  std::uint64_t seed_ = 0, tick_ = 0, last_input_tick_ = 0;
  std::optional<Command> mailbox_;
  Command held_, applied_;
  bool have_input_ = false;
  bool recording_ = false;
  bool flushed_ = false;
  Observation last_obs_;
  double obs_time_ = 0.0;
  il::DemoTrajectory demo_;
  Trajectory traj_;
  std::string pause_reason_;
  std::vector<std::string> written_;
};

}  // namespace hiernav::teleop
