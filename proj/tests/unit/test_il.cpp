#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "hiernav/il/bc.hpp"
#include "hiernav/il/demos.hpp"
#include "hiernav/il/oracle.hpp"
#include "hiernav/lowlevel.hpp"

using namespace hiernav;
using namespace hiernav::il;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("hiernav_il_" + name);
  std::filesystem::remove_all(p);
  return p;
}

Observation random_obs(CounterRng& rng) {
  Observation o;
  for (auto& r : o.ranges) r = rng.uniform(0.3, 5.0);
  o.heading = rng.uniform(-0.5, 0.5);
  o.goal_bearing = rng.uniform(-0.5, 0.5);
  o.forward_speed = rng.uniform(0.0, 1.0);
  o.yaw_rate = rng.uniform(-1.0, 1.0);
  return o;
}

DemoTrajectory make_traj(const std::string& name, int n, std::uint64_t seed,
                         const std::function<Command(int, CounterRng&)>& cmd,
                         const std::function<Observation(int, CounterRng&)>& obs) {
  DemoTrajectory tr;
  tr.name = name;
  tr.scene_seed = seed;
  CounterRng rng(seed, 1, 0);
  for (int k = 0; k < n; ++k) tr.records.push_back({k * 4 * kTickDt, obs(k, rng), cmd(k, rng).clipped()});
  return tr;
}

DemoDataset random_dataset(int trajectories, int len, std::uint64_t seed) {
  DemoDataset ds;
  for (int i = 0; i < trajectories; ++i)
    ds.trajectories.push_back(make_traj(
        "t" + std::to_string(i) + ".jsonl", len, seed + i,
        [](int, CounterRng& r) { return Command{r.uniform(0.0, 1.0), r.uniform(-1.5, 1.5)}; },
        [](int, CounterRng& r) { return random_obs(r); }));
  return ds;
}

BcConfig quick(BcArch arch, int epochs) {
  BcConfig c;
  c.arch = arch;
  c.max_epochs = epochs;
  c.windows_per_epoch = 128;
  c.embed = 16;
  c.hidden = 16;
  c.patience = 1000;
  return c;
}

Command deploy(const BcResult& res, const Observation& o, int calls = 1) {
  BcNavigator nav(res.params, res.meta);
  nav.reset(1);
  Scene scene;
  RobotState robot;
  Command u;
  for (int k = 0; k < calls; ++k) u = nav.act({o, scene, robot});
  return u;
}

}  // namespace

// ---------------------------------------------------------------------------
// Dataset format

TEST(DemoDataset, RoundTripIsBitExact) {
  auto ds = random_dataset(3, 7, 40);
  ds.trajectories[1].source = DemoSource::HumanTeleop;
  ds.trajectories[1].difficulty = Difficulty::Hard;
  ds.trajectories[2].status = "success";
  const auto dir = temp_dir("roundtrip");
  write_dataset(dir, ds);
  const auto back = read_dataset(dir);
  EXPECT_EQ(ds, back);
}

TEST(DemoDataset, KeepFalseIsSkippedUnlessAsked) {
  auto ds = random_dataset(3, 4, 41);
  ds.trajectories[0].keep = false;
  const auto dir = temp_dir("keep");
  write_dataset(dir, ds);
  EXPECT_EQ(2u, read_dataset(dir).trajectories.size());
  EXPECT_EQ(3u, read_dataset(dir, false).trajectories.size());
}

TEST(DemoDataset, TreeMergesSubdirectoriesInNameOrder) {
  const auto dir = temp_dir("tree");
  std::filesystem::remove_all(dir);
  const auto hard = random_dataset(2, 3, 45), easy = random_dataset(1, 3, 46);
  write_dataset(dir / "hard", hard);
  write_dataset(dir / "easy", easy);
  const auto all = read_dataset_tree(dir);
  ASSERT_EQ(3u, all.trajectories.size());
  EXPECT_EQ("easy/" + easy.trajectories[0].name, all.trajectories[0].name);
  EXPECT_EQ(hard.trajectories[1].records, all.trajectories[2].records);
  EXPECT_EQ(read_dataset(dir / "hard"), read_dataset_tree(dir / "hard"));
}

TEST(DemoDataset, RecordLineHasDocumentedFields) {
  const auto ds = random_dataset(1, 1, 42);
  const auto j = record_to_json(ds.trajectories[0].records[0]);
  for (const char* k : {"t", "ranges", "heading", "goal_bearing", "v", "omega", "cmd"}) EXPECT_TRUE(j.contains(k)) << k;
  EXPECT_EQ(72u, j["ranges"].size());
  EXPECT_EQ(2u, j["cmd"].size());
}

TEST(DemoDataset, NonIncreasingTimestampsRejected) {
  auto ds = random_dataset(1, 3, 43);
  ds.trajectories[0].records[2].t = ds.trajectories[0].records[1].t;
  EXPECT_THROW(validate(ds.trajectories[0]), FormatError);
}

TEST(DemoDataset, OutOfBoundsCommandRejected) {
  auto ds = random_dataset(1, 3, 44);
  ds.trajectories[0].records[0].cmd.v = 1.2;
  EXPECT_THROW(validate(ds.trajectories[0]), FormatError);
}

TEST(DemoDataset, MissingManifestIsFormatError) {
  const auto dir = temp_dir("nomanifest");
  std::filesystem::create_directories(dir);
  EXPECT_THROW(read_dataset(dir), FormatError);
}

TEST(DemoDataset, MalformedLineNamesFileAndLine) {
  const auto dir = temp_dir("malformed");
  write_dataset(dir, random_dataset(1, 2, 45));
  std::ofstream(dir / "t0.jsonl", std::ios::app) << "{not json\n";
  try {
    read_dataset(dir);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("t0.jsonl:3"), std::string::npos) << e.what();
  }
}

TEST(DemoSplit, DisjointCoveringAndTrajectoryLevel) {
  const auto ds = random_dataset(10, 2, 46);
  const auto s = split_by_trajectory(ds, 0.2, 7);
  EXPECT_EQ(2u, s.validation.size());
  EXPECT_EQ(8u, s.train.size());
  std::vector<int> seen(10, 0);
  for (auto i : s.train) ++seen[i];
  for (auto i : s.validation) ++seen[i];
  for (int c : seen) EXPECT_EQ(1, c);
}

TEST(DemoSplit, AlwaysKeepsATrainingTrajectory) {
  const auto ds = random_dataset(1, 2, 47);
  const auto s = split_by_trajectory(ds, 0.9, 7);
  EXPECT_EQ(1u, s.train.size());
  EXPECT_TRUE(s.validation.empty());
}

// ---------------------------------------------------------------------------
// Training

TEST(BcTraining, EmptyDatasetIsConfigError) {
  EXPECT_THROW(train_bc(DemoDataset{}, quick(BcArch::Rnn, 1)), ConfigError);
}

TEST(BcTraining, ValidationTrajectoriesDoNotInfluenceTraining) {
  auto ds = random_dataset(6, 12, 50);
  auto cfg = quick(BcArch::Rnn, 3);
  cfg.validation_fraction = 0.34;
  const auto a = train_bc(ds, cfg);
  const auto split = split_by_trajectory(ds, cfg.validation_fraction, cfg.seed);
  ASSERT_FALSE(split.validation.empty());
  for (auto i : split.validation)
    for (auto& r : ds.trajectories[i].records) {
      r.obs.ranges.fill(0.01);
      r.cmd = Command{1.0, -1.5};
    }
  const auto b = train_bc(ds, cfg);
  ASSERT_EQ(a.curve.size(), b.curve.size());
  for (std::size_t e = 0; e < a.curve.size(); ++e) EXPECT_EQ(a.curve[e].train_nll, b.curve[e].train_nll);
  EXPECT_EQ(a.meta["normalizer"], b.meta["normalizer"]);
}

TEST(BcTraining, IdenticalSeedsGiveIdenticalCheckpoints) {
  const auto ds = random_dataset(4, 15, 51);
  for (auto arch : {BcArch::Rnn, BcArch::Mlp}) {
    const auto a = train_bc(ds, quick(arch, 2));
    const auto b = train_bc(ds, quick(arch, 2));
    EXPECT_EQ(nn::checksum_hex(a.params.values), nn::checksum_hex(b.params.values));
    EXPECT_EQ(a.meta, b.meta);
  }
}

class BcArchTest : public ::testing::TestWithParam<BcArch> {};

TEST_P(BcArchTest, ConstantCommandIsReproducedInModeOutput) {
  DemoDataset ds;
  for (int i = 0; i < 4; ++i)
    ds.trajectories.push_back(make_traj(
        "c" + std::to_string(i) + ".jsonl", 30, 60 + i, [](int, CounterRng&) { return Command{0.5, 0.0}; },
        [](int, CounterRng& r) { return random_obs(r); }));
  const auto res = train_bc(ds, quick(GetParam(), 40));
  CounterRng rng(99, 0, 0);
  for (int k = 0; k < 5; ++k) {
    const auto u = deploy(res, random_obs(rng), 3);
    EXPECT_NEAR(0.5, u.v, 0.05);
    EXPECT_NEAR(0.0, u.w, 0.05);
  }
}

TEST_P(BcArchTest, BimodalTargetsKeepBothModes) {
  // identical observations, half the commands turn left and half right
  CounterRng orng(70, 0, 0);
  const Observation fixed = random_obs(orng);
  DemoDataset ds;
  for (int i = 0; i < 4; ++i)
    ds.trajectories.push_back(make_traj(
        "b" + std::to_string(i) + ".jsonl", 40, 70 + i,
        [](int k, CounterRng&) { return Command{0.5, k % 2 == 0 ? 1.0 : -1.0}; },
        [&](int, CounterRng&) { return fixed; }));
  auto cfg = quick(GetParam(), 40);
  cfg.validation_fraction = 0.0;
  nn::Mat<float> x(kNavInputSize, 1);
  std::vector<nn::Mat<float>> window;
  // finding both modes depends on the initialization, so a majority of seeds
  // must keep them rather than one
  int bimodal = 0;
  for (std::uint64_t seed : {1, 2, 3}) {
    cfg.seed = seed;
    const auto res = train_bc(ds, cfg);
    const nn::NavigatorNet net(res.params.arch);
    Normalizer::from_json(res.meta["normalizer"]).apply(fixed, x.data());
    // the recurrent net was trained on windows of identical inputs
    window.assign(res.meta["window"].get<std::size_t>(), x);
    const auto raw = net.forward<float>(res.params.values, window);
    double near_pos = 0.0, near_neg = 0.0;
    for (const auto& c : nn::gmm_decode(net.gmm(), raw.back().data())) {
      if (std::abs(c.mean[1] - 1.0) < 0.2) near_pos += c.weight;
      if (std::abs(c.mean[1] + 1.0) < 0.2) near_neg += c.weight;
    }
    if (near_pos >= 0.3 && near_neg >= 0.3) ++bimodal;
  }
  EXPECT_GE(bimodal, 2);

  // a single Gaussian on the same data regresses to the midpoint
  cfg.gmm_k = 1;
  const auto uni = train_bc(ds, cfg);
  const nn::NavigatorNet unet(uni.params.arch);
  Normalizer::from_json(uni.meta["normalizer"]).apply(fixed, x.data());
  window.assign(uni.meta["window"].get<std::size_t>(), x);
  const auto uraw = unet.forward<float>(uni.params.values, window);
  EXPECT_NEAR(0.0, nn::gmm_decode(unet.gmm(), uraw.back().data())[0].mean[1], 0.1);
}

TEST_P(BcArchTest, SingleShortTrajectoryOverfits) {
  DemoDataset ds;
  ds.trajectories.push_back(make_traj(
      "s.jsonl", 6, 80, [](int k, CounterRng&) { return Command{0.1 + 0.15 * k, -1.0 + 0.4 * k}; },
      [](int, CounterRng& r) { return random_obs(r); }));
  auto cfg = quick(GetParam(), 600);
  cfg.windows_per_epoch = 32;
  cfg.validation_fraction = 0.0;
  const auto res = train_bc(ds, cfg);
  // floor with sigma >= 1e-3 is 2 * (log(1e-3) + log(sqrt(2 pi))) = -11.98
  EXPECT_LT(res.best_validation_nll, -5.0);
  EXPECT_GT(res.best_validation_nll, -11.99);
}

INSTANTIATE_TEST_SUITE_P(Arch, BcArchTest, ::testing::Values(BcArch::Rnn, BcArch::Mlp),
                         [](const auto& info) { return info.param == BcArch::Rnn ? "Rnn" : "Mlp"; });

TEST(BcTraining, MotionDirectionNeedsMemory) {
  // A beam's range drifts toward or away from the robot; the command turns
  // with the drift direction. One scan shows only a position, two show the
  // direction. Command noise bounds the achievable NLL, so the memoryless
  // net pays log 2 for the unresolved sign.
  auto make = [](int n_traj, std::uint64_t seed) {
    DemoDataset ds;
    for (int i = 0; i < n_traj; ++i) {
      const double dir = i % 2 == 0 ? 1.0 : -1.0;
      auto tr = make_traj(
          "m" + std::to_string(i) + ".jsonl", 24, seed + i,
          [dir](int, CounterRng& r) { return Command{0.5 + 0.05 * r.normal(), dir + 0.05 * r.normal()}; },
          [dir](int k, CounterRng& r) {
            Observation o;
            o.ranges.fill(5.0);
            // the pedestrian spans a few beams at this range
            const double range = 2.5 + dir * (0.15 * (k % 8) - 0.525);
            for (int b = 34; b < 39; ++b) o.ranges[b] = range + 0.01 * r.normal();
            return o;
          });
      ds.trajectories.push_back(std::move(tr));
    }
    return ds;
  };
  auto ds = make(24, 90);
  auto rnn_cfg = quick(BcArch::Rnn, 200);
  auto mlp_cfg = quick(BcArch::Mlp, 200);
  rnn_cfg.adam.lr = mlp_cfg.adam.lr = 3e-3;
  const auto rnn = train_bc(ds, rnn_cfg);
  const auto mlp = train_bc(ds, mlp_cfg);
  // the memoryless floor is log 2 above the recurrent one
  EXPECT_LT(rnn.best_validation_nll, mlp.best_validation_nll - 0.3);
}

TEST(BcNavigator, RejectsCheckpointWithoutNormalizer) {
  const nn::NavigatorNet net(nn::NavigatorNet::make_arch(true, 72, 2, 8, 8, 2));
  EXPECT_THROW(BcNavigator(net.init(1), nlohmann::json::object()), FormatError);
}

TEST(BcNavigator, RejectsWrongInputSize) {
  const nn::NavigatorNet net(nn::NavigatorNet::make_arch(true, 10, 2, 8, 8, 2));
  EXPECT_THROW(BcNavigator(net.init(1), {{"normalizer", Normalizer{}.to_json()}}), ConfigError);
}

// ---------------------------------------------------------------------------
// Oracle demonstrations

TEST(OracleDemos, RecordsDwaCommandsAndIsDeterministic) {
  auto ideal = [] { return std::make_unique<IdealIntegrator>(); };
  const auto a = generate_oracle_demos(Difficulty::Easy, 2, 5, ideal);
  const auto b = generate_oracle_demos(Difficulty::Easy, 2, 5, ideal);
  ASSERT_EQ(2u, a.trajectories.size());
  EXPECT_EQ(a, b);
  for (const auto& tr : a.trajectories) {
    EXPECT_EQ("success", tr.status);
    EXPECT_EQ(DemoSource::DwaOracle, tr.source);
    validate(tr);
  }
  // every record equals the DWA output at that navigation tick
  const auto& tr = a.trajectories[0];
  controllers::DwaNavigator nav;
  IdealIntegrator low;
  std::size_t k = 0;
  bool all_equal = true;
  run_episode(generate_scene(tr.scene_seed, Difficulty::Easy), nav, low,
              [&](const Observation& o, const Command& u, double t) {
                all_equal = all_equal && k < tr.records.size() && tr.records[k].obs == o && tr.records[k].cmd == u &&
                            tr.records[k].t == t;
                ++k;
              });
  EXPECT_TRUE(all_equal);
  EXPECT_EQ(tr.records.size(), k);
}

namespace {
struct Collapsing : LowLevel {
  void reset(std::uint64_t) override {}
  bool step(RobotState&, const Command&) override { return true; }
  nlohmann::json spec() const override { return {{"kind", "collapsing"}}; }
};
}  // namespace

TEST(OracleDemos, AbortsWhenThePlannerKeepsFailing) {
  try {
    generate_oracle_demos(Difficulty::Easy, 5, 1, [] { return std::make_unique<Collapsing>(); });
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("10%"), std::string::npos) << e.what();
  }
}
