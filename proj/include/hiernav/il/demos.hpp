#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <string>
#include <vector>

#include <json.hpp>

#include "hiernav/core/errors.hpp"
#include "hiernav/core/rng.hpp"
#include "hiernav/hierarchy.hpp"
#include "hiernav/sensing.hpp"

namespace hiernav::il {

enum class DemoSource { HumanTeleop, DwaOracle };

inline std::string_view to_string(DemoSource s) { return s == DemoSource::HumanTeleop ? "human-teleop" : "dwa-oracle"; }

inline DemoSource parse_demo_source(std::string_view s) {
  if (s == "human-teleop") return DemoSource::HumanTeleop;
  if (s == "dwa-oracle") return DemoSource::DwaOracle;
  throw FormatError("unknown demo source '" + std::string(s) + "'");
}

/// One navigation tick: what the navigator saw and the command it was given.
struct DemoRecord {
  double t = 0.0;
  Observation obs;
  Command cmd;

  bool operator==(const DemoRecord&) const = default;
};

struct DemoTrajectory {
  std::string name;  // file name inside the dataset directory
  DemoSource source = DemoSource::DwaOracle;
  std::uint64_t scene_seed = 0;
  Difficulty difficulty = Difficulty::Easy;
  bool keep = true;
  std::string status;  // terminal episode state
  std::vector<DemoRecord> records;

  bool operator==(const DemoTrajectory&) const = default;
};

struct DemoDataset {
  std::vector<DemoTrajectory> trajectories;

  std::size_t records() const {
    std::size_t n = 0;
    for (const auto& t : trajectories) n += t.records.size();
    return n;
  }
  bool operator==(const DemoDataset&) const = default;
};

/// Commands within bounds and strictly increasing timestamps.
inline void validate(const DemoTrajectory& tr) {
  for (std::size_t i = 0; i < tr.records.size(); ++i) {
    const auto& r = tr.records[i];
    if (!r.cmd.finite() || r.cmd.v < Command::v_min || r.cmd.v > Command::v_max || std::abs(r.cmd.w) > Command::w_max)
      throw FormatError(tr.name + ": record " + std::to_string(i) + " has an out-of-bounds command");
    if (i > 0 && !(r.t > tr.records[i - 1].t))
      throw FormatError(tr.name + ": timestamps not strictly increasing at record " + std::to_string(i));
  }
}

// ---------------------------------------------------------------------------
// JSON-lines files. nlohmann prints doubles with round-trip precision, so a
// write/read cycle is bit-exact.

inline nlohmann::json record_to_json(const DemoRecord& r) {
  return {{"t", r.t},
          {"ranges", r.obs.ranges},
          {"heading", r.obs.heading},
          {"goal_bearing", r.obs.goal_bearing},
          {"v", r.obs.forward_speed},
          {"omega", r.obs.yaw_rate},
          {"cmd", {r.cmd.v, r.cmd.w}}};
}

inline DemoRecord record_from_json(const nlohmann::json& j) {
  DemoRecord r;
  r.t = j.at("t").get<double>();
  const auto& ranges = j.at("ranges");
  if (!ranges.is_array() || ranges.size() != SensorConstants::beams)
    throw FormatError("demo record needs " + std::to_string(SensorConstants::beams) + " ranges");
  for (int i = 0; i < SensorConstants::beams; ++i) r.obs.ranges[i] = ranges[i].get<double>();
  r.obs.heading = j.at("heading").get<double>();
  r.obs.goal_bearing = j.at("goal_bearing").get<double>();
  r.obs.forward_speed = j.at("v").get<double>();
  r.obs.yaw_rate = j.at("omega").get<double>();
  r.cmd = {j.at("cmd").at(0).get<double>(), j.at("cmd").at(1).get<double>()};
  return r;
}

inline void write_trajectory_jsonl(const std::filesystem::path& path, const DemoTrajectory& tr) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  for (const auto& r : tr.records) out << record_to_json(r).dump() << '\n';
  if (!out) throw FormatError("write failed: " + path.string());
}

inline std::vector<DemoRecord> read_trajectory_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read demo file " + path.string());
  std::vector<DemoRecord> recs;
  std::string line;
  for (int n = 1; std::getline(in, line); ++n) {
    if (line.empty()) continue;
    try {
      recs.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return recs;
}

inline nlohmann::json manifest_entry(const DemoTrajectory& tr) {
  return {{"file", tr.name},
          {"source", std::string(to_string(tr.source))},
          {"scene_seed", tr.scene_seed},
          {"difficulty", std::string(to_string(tr.difficulty))},
          {"keep", tr.keep},
          {"status", tr.status},
          {"records", tr.records.size()}};
}

inline constexpr const char* kManifestName = "manifest.json";

inline void write_manifest(const std::filesystem::path& dir, const std::vector<nlohmann::json>& entries) {
  nlohmann::json m;
  m["format"] = "hiernav-demos";
  m["version"] = 1;
  m["trajectories"] = entries;
  std::ofstream out(dir / kManifestName);
  if (!out) throw FormatError("cannot write " + (dir / kManifestName).string());
  out << std::setw(1) << m << '\n';
}

/// Writes one file per trajectory plus the manifest.
inline void write_dataset(const std::filesystem::path& dir, const DemoDataset& ds) {
  std::filesystem::create_directories(dir);
  std::vector<nlohmann::json> entries;
  for (const auto& tr : ds.trajectories) {
    if (tr.name.empty() || tr.name.find('/') != std::string::npos) throw ConfigError("bad demo file name '" + tr.name + "'");
    write_trajectory_jsonl(dir / tr.name, tr);
    entries.push_back(manifest_entry(tr));
  }
  write_manifest(dir, entries);
}

/// Reads a dataset directory. With `kept_only`, trajectories the manifest
/// marks keep=false are skipped.
inline DemoDataset read_dataset(const std::filesystem::path& dir, bool kept_only = true) {
  std::ifstream in(dir / kManifestName);
  if (!in) throw FormatError("no " + std::string(kManifestName) + " in " + dir.string());
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(dir.string() + ": manifest is not JSON: " + e.what());
  }
  if (m.value("format", "") != "hiernav-demos") throw FormatError(dir.string() + ": not a demo manifest");
  DemoDataset ds;
  for (const auto& e : m.at("trajectories")) {
    DemoTrajectory tr;
    tr.name = e.at("file").get<std::string>();
    tr.source = parse_demo_source(e.at("source").get<std::string>());
    tr.scene_seed = e.at("scene_seed").get<std::uint64_t>();
    tr.difficulty = parse_difficulty(e.at("difficulty").get<std::string>());
    tr.keep = e.value("keep", true);
    tr.status = e.value("status", "");
    if (kept_only && !tr.keep) continue;
    tr.records = read_trajectory_jsonl(dir / tr.name);
    validate(tr);
    ds.trajectories.push_back(std::move(tr));
  }
  return ds;
}

/// A dataset directory, or a directory of them (the per-difficulty layout of
/// gen-demos): subdirectories holding a manifest are merged in name order,
/// with trajectory names prefixed by the subdirectory.
inline DemoDataset read_dataset_tree(const std::filesystem::path& dir, bool kept_only = true) {
  if (std::filesystem::exists(dir / kManifestName)) return read_dataset(dir, kept_only);
  std::vector<std::filesystem::path> subs;
  if (std::filesystem::is_directory(dir))
    for (const auto& e : std::filesystem::directory_iterator(dir))
      if (e.is_directory() && std::filesystem::exists(e.path() / kManifestName)) subs.push_back(e.path());
  if (subs.empty()) throw FormatError("no " + std::string(kManifestName) + " in " + dir.string() + " or its subdirectories");
  std::sort(subs.begin(), subs.end());
  DemoDataset ds;
  for (const auto& s : subs)
    for (auto& tr : read_dataset(s, kept_only).trajectories) {
      tr.name = (s.filename() / tr.name).generic_string();
      ds.trajectories.push_back(std::move(tr));
    }
  return ds;
}

// ---------------------------------------------------------------------------
// Splits

struct DatasetSplit {
  std::vector<std::size_t> train, validation;  // trajectory indices
};

/// Trajectory-level split: whole trajectories go to one side. Keeps at least
/// one training trajectory; validation may be empty for tiny datasets.
inline DatasetSplit split_by_trajectory(const DemoDataset& ds, double validation_fraction, std::uint64_t seed) {
  const std::size_t n = ds.trajectories.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  CounterRng rng(seed, 0x5b11, 0);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  std::size_t n_val = static_cast<std::size_t>(std::floor(validation_fraction * static_cast<double>(n)));
  if (n_val >= n) n_val = n > 0 ? n - 1 : 0;
  DatasetSplit s;
  s.validation.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  s.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.validation.begin(), s.validation.end());
  return s;
}

/// Network input layout: 72 ranges then heading and goal bearing. The body's
/// own speed and yaw rate stay out: the demonstrator's command is close to
/// the current speed, so a cloned policy given it learns to copy its own
/// velocity (stalls at rest) instead of reading the scene.
inline constexpr int kNavScalars = 2;
inline constexpr int kNavInputSize = SensorConstants::beams + kNavScalars;

template <class S>
void observation_features(const Observation& o, S* out) {
  for (int i = 0; i < SensorConstants::beams; ++i) out[i] = static_cast<S>(o.ranges[i]);
  out[SensorConstants::beams + 0] = static_cast<S>(o.heading);
  out[SensorConstants::beams + 1] = static_cast<S>(o.goal_bearing);
}

/// Smoothness statistic for a dataset: mean |delta command| per navigation
/// tick, per channel.
inline std::array<double, 2> command_jerk(const DemoDataset& ds) {
  std::array<double, 2> s{};
  std::size_t n = 0;
  for (const auto& tr : ds.trajectories)
    for (std::size_t i = 1; i < tr.records.size(); ++i) {
      s[0] += std::abs(tr.records[i].cmd.v - tr.records[i - 1].cmd.v);
      s[1] += std::abs(tr.records[i].cmd.w - tr.records[i - 1].cmd.w);
      ++n;
    }
  if (n > 0) s = {s[0] / n, s[1] / n};
  return s;
}

}  // namespace hiernav::il
