#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "hiernav/eval/nav_benchmark.hpp"
#include "hiernav/eval/report.hpp"
#include "hiernav/eval/seeds.hpp"
#include "hiernav/eval/tracking.hpp"
#include "hiernav/lowlevel.hpp"

using namespace hiernav;
using namespace hiernav::eval;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("hiernav_eval_" + name);
  std::filesystem::remove_all(p);
  return p;
}

struct Stop : NavPolicy {
  Command act(const NavContext&) override { return {}; }
  std::string name() const override { return "stop"; }
};

struct Topple : LowLevel {
  void reset(std::uint64_t) override {}
  bool step(RobotState&, const Command&) override { return true; }
  nlohmann::json spec() const override { return {{"kind", "topple"}}; }
};

// Places the body exactly on the reference each tick.
struct OnReference : LowLevel {
  explicit OnReference(const Reference& r) : ref(r) {}
  void reset(std::uint64_t) override { k = 0; }
  bool step(RobotState& s, const Command&) override {
    ++k;
    s.x = ref.at_tick(k).x;
    s.y = ref.at_tick(k).y;
    return false;
  }
  nlohmann::json spec() const override { return {{"kind", "on-reference"}}; }
  const Reference& ref;
  std::size_t k = 0;
};

double speed_at(const Reference& r, double t) {
  const auto k = static_cast<std::size_t>(std::lround(t * kTickHz));
  return (r.arc[k + 1] - r.arc[k]) / kTickDt;
}

}  // namespace

// ---------------------------------------------------------------------------
// References

TEST(Reference, XLinearCoversSevenMetresInTenSeconds) {
  const auto r = make_reference(TrackSuite::XLinear);
  EXPECT_NEAR(7.0, r.arc[static_cast<std::size_t>(10 * kTickHz)], 1e-9);
  EXPECT_NEAR(7.0, r.setpoints[10].p.x, 1e-9);
  EXPECT_NEAR(0.0, r.setpoints[10].p.y, 1e-12);
}

TEST(Reference, XStepSpacingSequence) {
  const auto r = make_reference(TrackSuite::XStep);
  EXPECT_NEAR(0.5, speed_at(r, 5.0), 1e-9);
  EXPECT_NEAR(0.7, speed_at(r, 15.0), 1e-9);
  EXPECT_NEAR(1.0, speed_at(r, 25.0), 1e-9);
}

TEST(Reference, XSineSpacingRange) {
  double lo = 1e9, hi = -1e9;
  for (double t = 0.0; t < 30.0; t += 0.01) {
    lo = std::min(lo, suite_speed(TrackSuite::XSine, t));
    hi = std::max(hi, suite_speed(TrackSuite::XSine, t));
  }
  EXPECT_NEAR(0.4, lo, 1e-6);
  EXPECT_NEAR(1.0, hi, 1e-6);
}

TEST(Reference, SineTrajYawExtrema) {
  double lo = 1e9, hi = -1e9;
  for (double t = 0.0; t < 30.0; t += 0.01) {
    lo = std::min(lo, suite_yaw(TrackSuite::SineTraj, t));
    hi = std::max(hi, suite_yaw(TrackSuite::SineTraj, t));
  }
  EXPECT_NEAR(0.0, lo, 1e-6);
  EXPECT_NEAR(1.4, hi, 1e-6);
}

TEST(Reference, ZigZagAlternatesEveryFiveSeconds) {
  EXPECT_DOUBLE_EQ(0.4, suite_yaw(TrackSuite::ZigZag, 2.0));
  EXPECT_DOUBLE_EQ(-0.4, suite_yaw(TrackSuite::ZigZag, 7.0));
  EXPECT_DOUBLE_EQ(0.4, suite_yaw(TrackSuite::ZigZag, 12.0));
}

TEST(Reference, DeterministicAcrossTrialSeeds) {
  const auto a = make_reference(TrackSuite::SineTraj, 1);
  const auto b = make_reference(TrackSuite::SineTraj, 2);
  ASSERT_EQ(a.dense.size(), b.dense.size());
  for (std::size_t k = 0; k < a.dense.size(); ++k) EXPECT_EQ(a.dense[k], b.dense[k]);
}

TEST(TrackSuiteNames, ParseRoundTripAndRejectUnknown) {
  for (auto s : kAllSuites) EXPECT_EQ(s, parse_suite(to_string(s)));
  EXPECT_THROW(parse_suite("circle"), ConfigError);
}

// ---------------------------------------------------------------------------
// Tracking trials

TEST(TrackSuite, OracleTrackerOnXLinear) {
  const auto r = run_track_suite("ideal", [] { return std::make_unique<IdealIntegrator>(); }, TrackSuite::XLinear);
  EXPECT_EQ(20u, r.trials.size());
  EXPECT_LT(r.mean_error(), 0.05);
  EXPECT_DOUBLE_EQ(1.0, r.success_rate());
}

TEST(TrackSuite, FallAtStartIsFailure) {
  const auto r = run_track_suite("topple", [] { return std::make_unique<Topple>(); }, TrackSuite::XLinear);
  EXPECT_DOUBLE_EQ(0.0, r.success_rate());
  for (const auto& t : r.trials) EXPECT_EQ(1, t.ticks);
}

TEST(TrackSuite, ErrorIsZeroOnTheReference) {
  const auto ref = make_reference(TrackSuite::SineTraj);
  OnReference low(ref);
  const auto t = run_track_trial(low, ref, 1);
  EXPECT_NEAR(0.0, t.mean_error, 1e-12);
  EXPECT_TRUE(t.success);
}

TEST(TrackSuite, AggregatesAreExactFractionsAndMeans) {
  SuiteResult r;
  r.trials.resize(4);
  r.trials[0] = {1, 0.1, 0.2, 0, 0.5, 0, false, true, 10};
  r.trials[1] = {2, 0.3, 0.4, 0, 0.1, 0, false, true, 10};
  r.trials[2] = {3, 0.2, 1.5, 0, 0.0, 0, false, false, 10};
  r.trials[3] = {4, 0.2, 0.3, 0, 0.2, 0, true, false, 3};
  EXPECT_DOUBLE_EQ(0.5, r.success_rate());
  EXPECT_NEAR(0.2, r.mean_error(), 1e-15);
  EXPECT_NEAR(std::sqrt(0.02 / 4), r.std_error(), 1e-15);
  EXPECT_NEAR(0.2, r.mean_drift(), 1e-15);
}

TEST(TrackSuite, RandomizedTrialsAreReproducible) {
  PlantMode m;
  m.randomize = true;
  const auto make = [&] { return std::make_unique<MpcGait>(m); };
  const std::array<std::uint64_t, 2> seeds{9001, 9002};
  const auto a = run_track_suite("mpc", make, TrackSuite::XStep, seeds);
  const auto b = run_track_suite("mpc", make, TrackSuite::XStep, seeds, 2);
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    EXPECT_EQ(a.trials[i].mean_error, b.trials[i].mean_error);
    EXPECT_EQ(a.trials[i].drift_integral, b.trials[i].drift_integral);
  }
}

// ---------------------------------------------------------------------------
// Navigation benchmark

TEST(CanonicalSeeds, FiftyDistinctPerDifficulty) {
  for (auto d : {Difficulty::Easy, Difficulty::Medium, Difficulty::Hard}) {
    const auto s = canonical_seeds(d);
    EXPECT_EQ(50u, s.size());
    EXPECT_EQ(50u, std::set<std::uint64_t>(s.begin(), s.end()).size());
  }
}

TEST(NavBenchmark, StopPolicyGoesNowhere) {
  const auto seeds = canonical_seeds(Difficulty::Easy).first(5);
  const auto r = run_nav_scenes("stop", Difficulty::Easy, seeds, [] { return std::make_unique<Stop>(); },
                                [] { return std::make_unique<IdealIntegrator>(); });
  const auto a = r.aggregate();
  EXPECT_DOUBLE_EQ(0.0, a.success_rate);
  EXPECT_NEAR(0.0, a.mean_distance, 1e-9);
}

TEST(NavBenchmark, AggregateMatchesRows) {
  NavBenchmarkResult r;
  r.rows = {{1, EpisodeState::SuccessReachedGoal, 50.0, 100, 0.0},
            {2, EpisodeState::FailCollision, 10.0, 50, 0.0},
            {3, EpisodeState::FailTimeout, 30.0, 70, 0.0}};
  const auto a = r.aggregate();
  EXPECT_EQ(3u, a.n);
  EXPECT_DOUBLE_EQ(30.0, a.mean_distance);
  EXPECT_NEAR(1.0 / 3.0, a.success_rate, 1e-15);
  EXPECT_NEAR(std::sqrt(800.0 / 3.0), a.std_distance, 1e-12);
}

TEST(NavBenchmark, FactoryErrorsSurfaceBeforeEpisodes) {
  int episodes = 0;
  NavBenchmarkOptions opt;
  opt.on_episode = [&](std::size_t, const EpisodeResult&) { ++episodes; };
  EXPECT_THROW(run_nav_benchmark(
                   "bad", Difficulty::Easy, []() -> std::unique_ptr<NavPolicy> { throw ConfigError("arch mismatch"); },
                   [] { return std::make_unique<IdealIntegrator>(); }, opt),
               ConfigError);
  EXPECT_EQ(0, episodes);
}

// ---------------------------------------------------------------------------
// Reports

TEST(Report, CellFormat) {
  EXPECT_EQ("44.3 \xC2\xB1 12.4 (80%)", format_cell(44.3, 12.4, 0.80));
  EXPECT_EQ("0.20 \xC2\xB1 0.02 (100%)", format_cell(0.2, 0.02, 1.0, 2));
}

TEST(Report, EmptyResultSetIsAnError) {
  EXPECT_THROW(emit_nav_report(temp_dir("empty"), {}), ConfigError);
  EXPECT_THROW(emit_track_report(temp_dir("empty2"), {}), ConfigError);
  NavBenchmarkResult none;
  none.method = "x";
  EXPECT_THROW(emit_nav_report(temp_dir("empty3"), {none}), ConfigError);
}

TEST(Report, NavCsvRoundTripReproducesAggregates) {
  NavBenchmarkResult r;
  r.method = "dwa";
  r.difficulty = Difficulty::Medium;
  r.rows = {{11, EpisodeState::SuccessReachedGoal, 49.999999999999993, 1000, 1.5},
            {12, EpisodeState::FailFall, 0.1 + 0.2, 20, 0.1},
            {13, EpisodeState::FailAborted, 3.0, 7, 0.2}};
  const auto dir = temp_dir("navcsv");
  emit_nav_report(dir, {r});
  NavBenchmarkResult back;
  back.rows = read_nav_csv(dir / "dwa_medium.csv");
  const auto a = r.aggregate(), b = back.aggregate();
  EXPECT_EQ(a.mean_distance, b.mean_distance);
  EXPECT_EQ(a.std_distance, b.std_distance);
  EXPECT_EQ(a.success_rate, b.success_rate);
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    EXPECT_EQ(r.rows[i].seed, back.rows[i].seed);
    EXPECT_EQ(r.rows[i].status, back.rows[i].status);
  }
  EXPECT_TRUE(std::filesystem::exists(dir / "aggregate.json"));
  EXPECT_TRUE(std::filesystem::exists(dir / "table.txt"));
  EXPECT_TRUE(std::filesystem::exists(dir / "timing.csv"));
}

TEST(Report, NavOutputsDoNotContainWallTime) {
  NavBenchmarkResult r;
  r.method = "m";
  r.rows = {{1, EpisodeState::FailTimeout, 1.0, 5, 123.456}};
  const auto d1 = temp_dir("wall1"), d2 = temp_dir("wall2");
  emit_nav_report(d1, {r});
  r.rows[0].wall_seconds = 9.0;
  emit_nav_report(d2, {r});
  for (const char* f : {"m_easy.csv", "aggregate.json", "table.txt"}) {
    std::ifstream a(d1 / f), b(d2 / f);
    EXPECT_EQ(std::string(std::istreambuf_iterator<char>(a), {}), std::string(std::istreambuf_iterator<char>(b), {}))
        << f;
  }
}

TEST(Report, TrackCsvRoundTripReproducesAggregates) {
  SuiteResult r;
  r.tracker = "rl";
  r.suite = TrackSuite::ZigZag;
  r.trials = {{9001, 0.123456789012345, 0.5, 0.01, 0.02, 0.3, false, true, 1140},
              {9002, 0.2, 1.2, 0.03, 0.04, 0.1, true, false, 17}};
  const auto dir = temp_dir("trackcsv");
  emit_track_report(dir, {r});
  SuiteResult back;
  back.trials = read_track_csv(dir / "rl_zigzag.csv");
  EXPECT_EQ(r.mean_error(), back.mean_error());
  EXPECT_EQ(r.std_error(), back.std_error());
  EXPECT_EQ(r.success_rate(), back.success_rate());
  EXPECT_EQ(r.mean_drift(), back.mean_drift());
  EXPECT_EQ(track_line(r), "rl zigzag: " + format_cell(r.mean_error(), r.std_error(), 0.5, 2));
}

TEST(Report, ForeignCsvRejected) {
  const auto dir = temp_dir("foreign");
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "x.csv") << "a,b\n1,2\n";
  EXPECT_THROW(read_nav_csv(dir / "x.csv"), FormatError);
  EXPECT_THROW(read_track_csv(dir / "x.csv"), FormatError);
}
