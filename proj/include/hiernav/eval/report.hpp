#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hiernav/eval/nav_benchmark.hpp"
#include "hiernav/eval/tracking.hpp"

namespace hiernav::eval {

/// "mean ± std (rate%)", the table cell format of both benchmarks.
inline std::string format_cell(double mean, double stddev, double rate, int decimals = 1) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.*f \xC2\xB1 %.*f (%.0f%%)", decimals, mean, decimals, stddev, 100.0 * rate);
  return buf;
}

// ---------------------------------------------------------------------------
// Navigation benchmark

inline constexpr const char* kNavCsvHeader = "seed,status,travel_distance,ticks";

inline void write_nav_csv(const std::filesystem::path& path, const NavBenchmarkResult& r) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << kNavCsvHeader << '\n' << std::setprecision(17);
  for (const auto& row : r.rows)
    out << row.seed << ',' << to_string(row.status) << ',' << row.travel_distance << ',' << row.ticks << '\n';
  if (!out) throw FormatError("write failed: " + path.string());
}

inline std::vector<NavSceneRow> read_nav_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != kNavCsvHeader) throw FormatError(path.string() + ": not a navigation benchmark CSV");
  std::vector<NavSceneRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream s(line);
    std::string seed, status, dist, ticks;
    if (!std::getline(s, seed, ',') || !std::getline(s, status, ',') || !std::getline(s, dist, ',') ||
        !std::getline(s, ticks))
      throw FormatError(path.string() + ": bad row '" + line + "'");
    NavSceneRow r;
    try {
      r.seed = std::stoull(seed);
      r.status = parse_episode_state(status);
      r.travel_distance = std::stod(dist);
      r.ticks = std::stoull(ticks);
    } catch (const std::exception&) {
      throw FormatError(path.string() + ": bad row '" + line + "'");
    }
    rows.push_back(r);
  }
  return rows;
}

inline nlohmann::json nav_aggregate_json(const NavBenchmarkResult& r) {
  const auto a = r.aggregate();
  return {{"method", r.method},
          {"difficulty", std::string(to_string(r.difficulty))},
          {"scenes", a.n},
          {"success_rate", a.success_rate},
          {"mean_distance", a.mean_distance},
          {"std_distance", a.std_distance},
          {"cell", format_cell(a.mean_distance, a.std_distance, a.success_rate)}};
}

/// Per-difficulty columns, one row per method.
inline std::string nav_table(const std::vector<NavBenchmarkResult>& results) {
  std::vector<std::string> methods;
  std::map<std::pair<std::string, Difficulty>, std::string> cells;
  for (const auto& r : results) {
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
    const auto a = r.aggregate();
    cells[{r.method, r.difficulty}] = format_cell(a.mean_distance, a.std_distance, a.success_rate);
  }
  std::ostringstream out;
  out << std::left << std::setw(16) << "method";
  for (auto d : {Difficulty::Easy, Difficulty::Medium, Difficulty::Hard}) out << " | " << std::setw(22) << to_string(d);
  out << '\n';
  for (const auto& m : methods) {
    out << std::setw(16) << m;
    for (auto d : {Difficulty::Easy, Difficulty::Medium, Difficulty::Hard}) {
      const auto it = cells.find({m, d});
      // setw counts bytes; the plus-minus sign is two
      out << " | " << std::setw(23) << (it == cells.end() ? std::string("-") : it->second);
    }
    out << '\n';
  }
  return out.str();
}

/// Writes <stem>.csv per result, aggregate.json and table.txt into `dir`,
/// plus timing.csv with wall-clock seconds (kept apart so the other files
/// are reproducible byte for byte).
inline void emit_nav_report(const std::filesystem::path& dir, const std::vector<NavBenchmarkResult>& results) {
  if (results.empty()) throw ConfigError("report: no results to write");
  std::filesystem::create_directories(dir);
  nlohmann::json agg = nlohmann::json::array();
  std::ofstream timing(dir / "timing.csv");
  timing << "method,difficulty,seed,wall_seconds\n";
  for (const auto& r : results) {
    if (r.rows.empty()) throw ConfigError("report: result '" + r.method + "' has no scenes");
    write_nav_csv(dir / (r.method + "_" + std::string(to_string(r.difficulty)) + ".csv"), r);
    agg.push_back(nav_aggregate_json(r));
    for (const auto& row : r.rows)
      timing << r.method << ',' << to_string(r.difficulty) << ',' << row.seed << ',' << row.wall_seconds << '\n';
  }
  std::ofstream(dir / "aggregate.json") << std::setw(2) << agg << '\n';
  std::ofstream(dir / "table.txt") << nav_table(results);
}

// ---------------------------------------------------------------------------
// Tracking suites

inline constexpr const char* kTrackCsvHeader =
    "seed,mean_error,max_error,mean_vel_error,mean_cmd_error,drift_integral,fell,success,ticks";

inline void write_track_csv(const std::filesystem::path& path, const SuiteResult& r) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << kTrackCsvHeader << '\n' << std::setprecision(17);
  for (const auto& t : r.trials)
    out << t.seed << ',' << t.mean_error << ',' << t.max_error << ',' << t.mean_vel_error << ','
        << t.mean_abs_v_cmd_error << ',' << t.drift_integral << ',' << int(t.fell) << ',' << int(t.success) << ','
        << t.ticks << '\n';
  if (!out) throw FormatError("write failed: " + path.string());
}

inline std::vector<TrialResult> read_track_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != kTrackCsvHeader) throw FormatError(path.string() + ": not a tracking-suite CSV");
  std::vector<TrialResult> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream s(line);
    TrialResult t;
    char c;
    int fell = 0, success = 0;
    if (!(s >> t.seed >> c >> t.mean_error >> c >> t.max_error >> c >> t.mean_vel_error >> c >>
          t.mean_abs_v_cmd_error >> c >> t.drift_integral >> c >> fell >> c >> success >> c >> t.ticks))
      throw FormatError(path.string() + ": bad row '" + line + "'");
    t.fell = fell != 0;
    t.success = success != 0;
    out.push_back(t);
  }
  return out;
}

inline nlohmann::json track_aggregate_json(const SuiteResult& r) {
  return {{"tracker", r.tracker},
          {"suite", std::string(to_string(r.suite))},
          {"trials", r.trials.size()},
          {"mean_error", r.mean_error()},
          {"std_error", r.std_error()},
          {"success_rate", r.success_rate()},
          {"mean_drift", r.mean_drift()},
          {"cell", format_cell(r.mean_error(), r.std_error(), r.success_rate(), 2)}};
}

inline std::string track_line(const SuiteResult& r) {
  return r.tracker + " " + std::string(to_string(r.suite)) + ": " +
         format_cell(r.mean_error(), r.std_error(), r.success_rate(), 2);
}

/// Suites as columns, trackers as rows.
inline std::string track_table(const std::vector<SuiteResult>& results) {
  std::vector<std::string> trackers;
  std::map<std::pair<std::string, TrackSuite>, std::string> cells;
  for (const auto& r : results) {
    if (std::find(trackers.begin(), trackers.end(), r.tracker) == trackers.end()) trackers.push_back(r.tracker);
    cells[{r.tracker, r.suite}] = format_cell(r.mean_error(), r.std_error(), r.success_rate(), 2);
  }
  std::ostringstream out;
  out << std::left << std::setw(10) << "tracker";
  for (auto s : kAllSuites) out << " | " << std::setw(20) << to_string(s);
  out << '\n';
  for (const auto& t : trackers) {
    out << std::setw(10) << t;
    for (auto s : kAllSuites) {
      const auto it = cells.find({t, s});
      out << " | " << std::setw(21) << (it == cells.end() ? std::string("-") : it->second);
    }
    out << '\n';
  }
  return out.str();
}

inline void emit_track_report(const std::filesystem::path& dir, const std::vector<SuiteResult>& results) {
  if (results.empty()) throw ConfigError("report: no results to write");
  std::filesystem::create_directories(dir);
  nlohmann::json agg = nlohmann::json::array();
  for (const auto& r : results) {
    if (r.trials.empty()) throw ConfigError("report: result '" + r.tracker + "' has no trials");
    write_track_csv(dir / (r.tracker + "_" + std::string(to_string(r.suite)) + ".csv"), r);
    agg.push_back(track_aggregate_json(r));
  }
  std::ofstream(dir / "aggregate.json") << std::setw(2) << agg << '\n';
  std::ofstream(dir / "table.txt") << track_table(results);
}

}  // namespace hiernav::eval
