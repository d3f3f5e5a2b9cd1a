#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "hiernav/eval/report.hpp"
#include "hiernav/eval/tracking.hpp"
#include "hiernav/il/bc.hpp"
#include "hiernav/il/oracle.hpp"
#include "hiernav/navigators.hpp"
#include "hiernav/replay.hpp"
#include "hiernav/rl/train_gait.hpp"
#include "hiernav/rl/train_hrl.hpp"
#include "hiernav/teleop/server.hpp"

namespace fs = std::filesystem;
using namespace hiernav;

namespace {

// Exit codes.
constexpr int kUsage = 1, kData = 2, kNumeric = 3;

std::string env_name(const std::string& flag) {
  std::string s = "HIERNAV_";
  for (char c : flag.substr(flag.find_first_not_of('-'))) s += c == '-' ? '_' : static_cast<char>(std::toupper(c));
  return s;
}

/// Option with an environment fallback: file < environment < flag.
template <typename T>
CLI::Option* opt(CLI::App* app, const std::string& flag, T& var, const std::string& desc) {
  return app->add_option(flag, var, desc)->envname(env_name(flag))->capture_default_str();
}

CLI::Option* flag(CLI::App* app, const std::string& name, bool& var, const std::string& desc) {
  return app->add_flag(name, var, desc)->envname(env_name(name));
}

struct Run {
  CLI::App* root = nullptr;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  /// Archives the resolved configuration next to the outputs; timing goes
  /// to a separate sidecar so the other files stay byte-identical.
  void archive(const fs::path& dir, const nlohmann::json& module_config = {}) const {
    fs::create_directories(dir);
    // only the subcommand that ran; the file can be passed back via --config
    std::istringstream all(root->config_to_str(true, false));
    std::ofstream cfg(dir / "resolved_config.toml");
    const auto prefix = root->get_subcommands().front()->get_name() + ".";
    for (std::string line; std::getline(all, line);)
      if (line.rfind(prefix, 0) == 0 || line.find('.') > line.find('=')) cfg << line << '\n';
    if (!module_config.is_null()) std::ofstream(dir / "module_config.json") << module_config.dump(2) << '\n';
  }
  void timing(const fs::path& dir) const {
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::ofstream(dir / "timing.json") << nlohmann::json{{"wall_seconds", secs}, {"finished_unix", now}}.dump(2) << '\n';
  }
};

int workers_default() { return default_workers(); }

PlantMode plant_mode(bool randomize, double slip_min) {
  PlantMode m;
  m.randomize = randomize;
  m.slip_min = slip_min;
  if (slip_min > 0.0) m.randomize = true;
  return m;
}

std::vector<Difficulty> difficulties(const std::string& s) {
  if (s == "all") return {Difficulty::Easy, Difficulty::Medium, Difficulty::Hard};
  return {parse_difficulty(s)};
}

void log(const std::string& s) { std::cerr << s << std::endl; }

// ---------------------------------------------------------------------------
// train-gait

struct TrainGaitArgs {
  std::string out;
  std::uint64_t seed = 1;
  long steps = 1'000'000;
  int envs = 16, horizon = 256, eval_every = 10, eval_episodes = 8, workers = workers_default();
  std::vector<int> hidden{128, 128};
  double lr = 3e-4, init_log_std = 0.0, gamma = 0.8, lambda = 0.9, target_kl = 0.02, entropy = 0.005, slip_min = 0.0;
  double gentle_fraction = 0.0, gentle_w = 0.5, top_speed_fraction = 0.0;
  bool randomize = false;
};

int train_gait_cmd(const TrainGaitArgs& a, const Run& run) {
  rl::TrainGaitConfig c;
  c.seed = a.seed;
  c.total_steps = a.steps;
  c.envs = a.envs;
  c.horizon = a.horizon;
  c.workers = a.workers;
  c.hidden.assign(a.hidden.begin(), a.hidden.end());
  c.init_log_std = a.init_log_std;
  c.eval_every = a.eval_every;
  c.eval_episodes = a.eval_episodes;
  c.adam.lr = a.lr;
  c.ppo.gamma = a.gamma;
  c.ppo.lambda = a.lambda;
  c.ppo.target_kl = a.target_kl;
  c.ppo.entropy_coef = a.entropy;
  c.task.plant = plant_mode(a.randomize, a.slip_min);
  c.task.gentle_fraction = a.gentle_fraction;
  c.task.gentle_w = a.gentle_w;
  c.task.top_speed_fraction = a.top_speed_fraction;
  c = rl::TrainGaitConfig::from_json(c.to_json());  // validation
  c.workers = a.workers;
  const fs::path out = a.out;
  run.archive(out, c.to_json());
  auto res = rl::train_gait(c, [](const rl::CurveRow& r) {
    log("step " + std::to_string(r.step) + "  eval reward/tick " + std::to_string(r.eval_rate) + "  |v-v_cmd| " +
        std::to_string(r.tracking_error) + "  falls " + std::to_string(r.eval_falls));
  });
  const nlohmann::json meta{{"kind", "gait"}, {"config", c.to_json()}, {"best_step", res.best_step},
                            {"best_eval_rate", res.best_eval_rate}};
  nn::save_checkpoint((out / "gait.ckpt").string(), res.best, meta);
  nn::save_checkpoint((out / "gait_last.ckpt").string(), res.last, meta);
  rl::write_curve_csv((out / "curve.csv").string(), res.curve);
  run.timing(out);
  log("wrote " + (out / "gait.ckpt").string() + " (best at step " + std::to_string(res.best_step) + ")");
  return 0;
}

// ---------------------------------------------------------------------------
// train-nav

struct TrainNavArgs {
  std::string out, demos, arch = "bc-rnn", low = "ideal";
  std::uint64_t seed = 1;
  int epochs = 200, window = 10, batch = 32, windows_per_epoch = 512, patience = 20, gmm_k = 5, hidden = 64, embed = 64;
  double lr = 0.0, val_frac = 0.2;  // lr 0: the architecture's default
  long steps = 300'000;
  int envs = 16, horizon = 128, workers = workers_default();
  bool randomize = false;
  std::string difficulty = "all";
};

int train_nav_cmd(const TrainNavArgs& a, const Run& run) {
  const fs::path out = a.out;
  if (a.arch == "hrl") {
    rl::TrainHrlConfig c;
    c.seed = a.seed;
    c.total_steps = a.steps;
    c.envs = a.envs;
    c.horizon = a.horizon;
    if (a.lr > 0.0) c.adam.lr = a.lr;
    c.task.difficulties = difficulties(a.difficulty);
    c = rl::TrainHrlConfig::from_json(c.to_json());
    c.workers = a.workers;
    const auto low_spec = low_level_spec(a.low, plant_mode(a.randomize, 0.0));
    const auto make_low = low_level_factory(low_spec);
    run.archive(out, {{"hrl", c.to_json()}, {"low_level", low_spec}});
    auto res = rl::train_hrl_nav(c, make_low, [](const rl::HrlCurveRow& r) {
      log("step " + std::to_string(r.step) + "  eval distance " + std::to_string(r.eval_distance) + "  success " +
          std::to_string(r.eval_success));
    });
    const nlohmann::json meta{{"kind", "hrl"}, {"config", c.to_json()}, {"low_level", low_spec},
                              {"best_step", res.best_step}, {"best_eval_distance", res.best_eval_distance}};
    nn::save_checkpoint((out / "nav.ckpt").string(), res.best, meta);
    rl::write_hrl_curve_csv((out / "curve.csv").string(), res.curve);
  } else {
    if (a.demos.empty()) throw ConfigError("train-nav --arch " + a.arch + " needs --demos <dir>");
    il::BcConfig c;
    c.arch = il::parse_bc_arch(a.arch);
    c.seed = a.seed;
    c.max_epochs = a.epochs;
    c.window = a.window;
    c.batch = a.batch;
    c.windows_per_epoch = a.windows_per_epoch;
    c.patience = a.patience;
    c.gmm_k = a.gmm_k;
    c.hidden = a.hidden;
    c.embed = a.embed;
    if (a.lr > 0.0) c.adam.lr = a.lr;
    c.validation_fraction = a.val_frac;
    c = il::BcConfig::from_json(c.to_json());
    const auto ds = il::read_dataset_tree(a.demos);
    if (ds.trajectories.empty()) throw FormatError(a.demos + " holds no kept trajectories");
    run.archive(out, c.to_json());
    auto res = il::train_bc(ds, c, [](const il::BcCurveRow& r) {
      if (r.epoch % 10 == 0)
        log("epoch " + std::to_string(r.epoch) + "  train nll " + std::to_string(r.train_nll) + "  val nll " +
            std::to_string(r.validation_nll));
    });
    res.meta["demos"] = ds.trajectories.size();
    nn::save_checkpoint((out / "nav.ckpt").string(), res.params, res.meta);
    il::write_bc_curve_csv((out / "curve.csv").string(), res.curve);
    log("best validation nll " + std::to_string(res.best_validation_nll) + " at epoch " + std::to_string(res.best_epoch));
  }
  run.timing(out);
  log("wrote " + (out / "nav.ckpt").string());
  return 0;
}

// ---------------------------------------------------------------------------
// gen-demos / collect-demos

struct GenDemosArgs {
  std::string out, difficulty = "hard", low = "ideal";
  int count = 80, workers = workers_default();
  std::uint64_t seed = 1;
};

int gen_demos_cmd(const GenDemosArgs& a, const Run& run) {
  const auto spec = low_level_spec(a.low);
  const auto make_low = low_level_factory(spec);
  il::OracleDemoOptions o;
  o.workers = a.workers;
  const fs::path out = a.out;
  run.archive(out);
  for (auto d : difficulties(a.difficulty)) {
    const auto ds = il::generate_oracle_demos(d, a.count, a.seed, make_low, o);
    const auto dir = difficulties(a.difficulty).size() > 1 ? out / std::string(to_string(d)) : out;
    il::write_dataset(dir, ds);
    const auto jerk = il::command_jerk(ds);
    log(std::string(to_string(d)) + ": " + std::to_string(ds.trajectories.size()) + " demos, " +
        std::to_string(ds.records()) + " records, command jerk v " + std::to_string(jerk[0]) + " w " +
        std::to_string(jerk[1]) + " -> " + dir.string());
  }
  run.timing(out);
  return 0;
}

struct CollectArgs {
  std::string out, bind = "127.0.0.1:8765", difficulty = "easy", low = "ideal", static_dir;
  std::uint64_t seed = 1;
  double speedup = 1.0;
  int episodes = 0;
  bool empty = false, keep_all = false;
};

std::atomic<bool> g_stop{false};

int collect_cmd(const CollectArgs& a, const Run& run) {
  teleop::TeleopConfig c;
  c.difficulty = parse_difficulty(a.difficulty);
  c.seed = a.seed;
  c.empty_corridor = a.empty;
  c.keep_all = a.keep_all;
  c.out_dir = a.out;
  c.low_level = low_level_spec(a.low);
  teleop::ServerOptions o;
  o.bind = teleop::parse_bind(a.bind);
  o.speedup = a.speedup;
  o.max_episodes = a.episodes;
  o.static_dir = a.static_dir;
  o.log = log;
  run.archive(a.out, c.to_json());
  teleop::Server server(c, o);
  std::signal(SIGINT, [](int) { g_stop = true; });
  std::signal(SIGTERM, [](int) { g_stop = true; });
  // the port line is machine-readable: scripted clients wait for it
  std::cout << "listening on " << o.bind.host << ":" << server.port() << std::endl;
  server.run(g_stop);
  log("served " + std::to_string(server.finished_episodes()) + " finished episodes");
  return 0;
}

// ---------------------------------------------------------------------------
// eval-nav / eval-gait

struct EvalNavArgs {
  std::string out, nav = "dwa", low = "mpc", difficulty = "all", trajectories;
  int workers = workers_default(), scenes = 50;
  bool randomize = false, empty = false;
  double temperature = 0.0;
};

int eval_nav_cmd(const EvalNavArgs& a, const Run& run) {
  const auto low_spec = low_level_spec(a.low, plant_mode(a.randomize, 0.0));
  const auto make_low = low_level_factory(low_spec);
  const auto make_nav = navigator_factory(a.nav, a.temperature);
  const auto label = navigator_label(a.nav);
  if (a.scenes < 1 || a.scenes > 50) throw ConfigError("--scenes must be in 1..50");
  std::vector<eval::NavBenchmarkResult> results;
  for (auto d : difficulties(a.difficulty)) {
    eval::NavBenchmarkOptions o;
    o.workers = a.workers;
    o.empty_corridor = a.empty;
    if (!a.trajectories.empty()) {
      const fs::path dir = fs::path(a.trajectories) / std::string(to_string(d));
      fs::create_directories(dir);
      o.on_episode = [dir, d](std::size_t i, const EpisodeResult& r) {
        write_trajectory((dir / ("scene_" + std::to_string(eval::canonical_seeds(d)[i]) + ".traj")).string(),
                         r.trajectory);
      };
    }
    results.push_back(
        eval::run_nav_scenes(label, d, eval::canonical_seeds(d).first(static_cast<std::size_t>(a.scenes)), make_nav, make_low, o));
  }
  std::cout << eval::nav_table(results);
  if (!a.out.empty()) {
    run.archive(a.out, {{"nav", a.nav}, {"low_level", low_spec}});
    eval::emit_nav_report(a.out, results);
    run.timing(a.out);
  }
  return 0;
}

struct EvalGaitArgs {
  std::string out, tracker = "mpc", suite = "all";
  int workers = workers_default();
  bool randomize = false;
  double slip_min = 0.0;
};

int eval_gait_cmd(const EvalGaitArgs& a, const Run& run) {
  const auto spec = low_level_spec(a.tracker, plant_mode(a.randomize, a.slip_min));
  const auto make_low = low_level_factory(spec);
  const std::string label = spec["kind"] == "learned" ? "rl" : a.tracker;
  std::vector<eval::SuiteResult> results;
  if (a.suite == "all") {
    for (auto s : eval::kAllSuites) results.push_back(eval::run_track_suite(label, make_low, s, eval::kTrackTrialSeeds, a.workers));
  } else {
    results.push_back(eval::run_track_suite(label, make_low, eval::parse_suite(a.suite), eval::kTrackTrialSeeds, a.workers));
  }
  for (const auto& r : results)
    std::cout << eval::track_line(r) << "  drift " << std::fixed << std::setprecision(3) << r.mean_drift() << '\n';
  if (!a.out.empty()) {
    run.archive(a.out, {{"tracker", spec}});
    eval::emit_track_report(a.out, results);
    run.timing(a.out);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// replay / inspect-ckpt

struct ReplayArgs {
  std::string file, render = "text", out;
  double tolerance = 1e-6;
};

int replay_cmd(const ReplayArgs& a) {
  const auto traj = read_trajectory(a.file);
  const auto c = replay_trajectory(traj);
  std::ostringstream s;
  s << "scene " << traj.header["scene"].dump() << "\n"
    << "low level " << traj.header["low_level"].dump() << "\n"
    << "recorded: " << to_string(c.recorded_status) << " at (" << c.recorded_pose[0] << ", " << c.recorded_pose[1]
    << ", " << c.recorded_pose[2] << ")\n"
    << "replayed: " << to_string(c.replayed.status.state) << " at (" << c.replayed.final_state.x << ", "
    << c.replayed.final_state.y << ", " << c.replayed.final_state.theta << ")\n"
    << "pose difference " << c.pose_error << " m, " << (c.equivalent(a.tolerance) ? "equivalent" : "NOT equivalent")
    << "\n";
  if (a.render == "text") s << render_ascii(scene_from_header(traj.header), c.replayed.trajectory);
  std::cout << s.str();
  if (!a.out.empty()) std::ofstream(a.out) << s.str();
  return c.equivalent(a.tolerance) ? 0 : kData;
}

int inspect_cmd(const std::string& file) {
  const auto ck = nn::load_checkpoint(file);
  std::cout << "kind      " << ck.meta.value("kind", "unknown") << "\n"
            << "version   " << ck.params.version << "\n"
            << "checksum  " << ck.checksum << "\n"
            << "params    " << ck.params.values.size() << "\n"
            << "arch      " << ck.params.arch.dump() << "\n";
  if (ck.meta.contains("config")) std::cout << "config    " << ck.meta["config"].dump() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical navigation workbench: gait training, navigator training, demonstrations, benchmarks."};
  app.set_config("--config", "", "TOML config file; environment HIERNAV_* variables and flags override it");
  app.require_subcommand(1);
  Run run;
  run.root = &app;
  std::function<int()> action;

  TrainGaitArgs tg;
  {
    auto* s = app.add_subcommand("train-gait", "Train the velocity-tracking gait policy with PPO");
    opt(s, "--out", tg.out, "Output directory")->required();
    opt(s, "--seed", tg.seed, "Training seed");
    opt(s, "--steps", tg.steps, "Environment steps");
    opt(s, "--envs", tg.envs, "Parallel environments");
    opt(s, "--horizon", tg.horizon, "Rollout length per environment and update");
    opt(s, "--hidden", tg.hidden, "Hidden layer widths")->delimiter(',');
    opt(s, "--lr", tg.lr, "Adam learning rate");
    opt(s, "--init-log-std", tg.init_log_std, "Initial policy log standard deviation");
    opt(s, "--gamma", tg.gamma, "Discount");
    opt(s, "--lambda", tg.lambda, "GAE lambda");
    opt(s, "--target-kl", tg.target_kl, "Approximate-KL early stop per update (0 disables)");
    opt(s, "--entropy", tg.entropy, "Entropy bonus coefficient");
    opt(s, "--eval-every", tg.eval_every, "Updates between held-out evaluations");
    opt(s, "--eval-episodes", tg.eval_episodes, "Held-out schedules per evaluation");
    flag(s, "--randomize", tg.randomize, "Randomize plant extrinsics per episode");
    opt(s, "--slip-min", tg.slip_min, "Lower bound of the randomized slip coefficient (implies --randomize)");
    opt(s, "--gentle-fraction", tg.gentle_fraction, "Share of schedule pieces drawn with |w| <= --gentle-w");
    opt(s, "--gentle-w", tg.gentle_w, "Yaw-rate bound of gentle schedule pieces (rad/s)");
    opt(s, "--top-speed-fraction", tg.top_speed_fraction, "Share of schedule pieces commanding the top speed");
    opt(s, "--workers", tg.workers, "Worker threads (results do not depend on it)");
    s->callback([&] { action = [&] { return train_gait_cmd(tg, run); }; });
  }

  TrainNavArgs tn;
  {
    auto* s = app.add_subcommand("train-nav", "Train a navigator: bc-rnn, bc-mlp from demonstrations, or hrl with PPO");
    opt(s, "--out", tn.out, "Output directory")->required();
    opt(s, "--arch", tn.arch, "Navigator architecture")->check(CLI::IsMember({"bc-rnn", "bc-mlp", "hrl"}));
    opt(s, "--demos", tn.demos, "Demonstration directory, or one with a subdirectory per difficulty (bc-rnn, bc-mlp)");
    opt(s, "--seed", tn.seed, "Training seed");
    opt(s, "--epochs", tn.epochs, "Maximum BC epochs");
    opt(s, "--window", tn.window, "BC truncated sequence length");
    opt(s, "--batch", tn.batch, "BC windows per minibatch");
    opt(s, "--windows-per-epoch", tn.windows_per_epoch, "BC windows sampled per epoch");
    opt(s, "--patience", tn.patience, "BC early-stop patience in epochs");
    opt(s, "--gmm-k", tn.gmm_k, "Mixture components");
    opt(s, "--hidden", tn.hidden, "Recurrent/hidden width");
    opt(s, "--embed", tn.embed, "Observation embedding width");
    opt(s, "--lr", tn.lr, "Adam learning rate (0: 1e-3 for BC, 3e-4 for HRL)");
    opt(s, "--val-frac", tn.val_frac, "Fraction of trajectories held out for validation");
    opt(s, "--steps", tn.steps, "HRL navigation steps");
    opt(s, "--envs", tn.envs, "HRL parallel environments");
    opt(s, "--horizon", tn.horizon, "HRL rollout length");
    opt(s, "--low", tn.low, "HRL low level: ideal, mpc or a gait checkpoint");
    flag(s, "--randomize", tn.randomize, "HRL: randomize plant extrinsics");
    opt(s, "--difficulty", tn.difficulty, "HRL training scenes: easy, medium, hard or all");
    opt(s, "--workers", tn.workers, "Worker threads (results do not depend on it)");
    s->callback([&] { action = [&] { return train_nav_cmd(tn, run); }; });
  }

  CollectArgs cd;
  {
    auto* s = app.add_subcommand("collect-demos", "Serve a live teleoperation session and record demonstrations");
    opt(s, "--out", cd.out, "Demonstration directory")->required();
    opt(s, "--bind", cd.bind, "Listen address host:port (port 0 picks a free one)");
    opt(s, "--difficulty", cd.difficulty, "Scene difficulty")->check(CLI::IsMember({"easy", "medium", "hard"}));
    opt(s, "--seed", cd.seed, "First scene seed; each reset advances it by one");
    opt(s, "--low", cd.low, "Low level: ideal, mpc or a gait checkpoint");
    opt(s, "--speedup", cd.speedup, "Run the clock this many times faster than real time");
    opt(s, "--episodes", cd.episodes, "Exit after this many finished episodes (0: run until interrupted)");
    opt(s, "--static", cd.static_dir, "Directory served to plain HTTP requests (the browser client)");
    flag(s, "--empty", cd.empty, "Empty corridor: no obstacles or pedestrians");
    flag(s, "--keep-all", cd.keep_all, "Keep failed episodes in the manifest too");
    s->callback([&] { action = [&] { return collect_cmd(cd, run); }; });
  }

  GenDemosArgs gd;
  {
    auto* s = app.add_subcommand("gen-demos", "Generate oracle demonstrations with the privileged DWA planner");
    opt(s, "--out", gd.out, "Demonstration directory")->required();
    opt(s, "--difficulty", gd.difficulty, "easy, medium, hard or all (one subdirectory each)");
    opt(s, "--count", gd.count, "Successful demonstrations per difficulty");
    opt(s, "--seed", gd.seed, "Scene stream seed");
    opt(s, "--low", gd.low, "Low level: ideal, mpc or a gait checkpoint");
    opt(s, "--workers", gd.workers, "Worker threads (results do not depend on it)");
    s->callback([&] { action = [&] { return gen_demos_cmd(gd, run); }; });
  }

  EvalNavArgs en;
  {
    auto* s = app.add_subcommand("eval-nav", "Run the navigation benchmark on the canonical scenes");
    opt(s, "--nav", en.nav, "dwa or a navigator checkpoint");
    opt(s, "--low", en.low, "Low level: ideal, mpc or a gait checkpoint");
    opt(s, "--difficulty", en.difficulty, "easy, medium, hard or all");
    opt(s, "--scenes", en.scenes, "Use the first N canonical scenes");
    flag(s, "--randomize", en.randomize, "Randomize plant extrinsics");
    flag(s, "--empty", en.empty, "Strip obstacles and pedestrians from the scenes (pipeline checks)");
    opt(s, "--temperature", en.temperature, "Mixture sampling temperature (0: mode)");
    opt(s, "--out", en.out, "Report directory");
    opt(s, "--trajectories", en.trajectories, "Also write one trajectory file per scene here");
    opt(s, "--workers", en.workers, "Worker threads (results do not depend on it)");
    s->callback([&] { action = [&] { return eval_nav_cmd(en, run); }; });
  }

  EvalGaitArgs eg;
  {
    auto* s = app.add_subcommand("eval-gait", "Run the velocity-tracking suites");
    opt(s, "--tracker", eg.tracker, "mpc, ideal or a gait checkpoint");
    opt(s, "--suite", eg.suite, "xlinear, xsine, xstep, sinetraj, zigzag or all");
    flag(s, "--randomize", eg.randomize, "Randomize plant extrinsics per trial");
    opt(s, "--slip-min", eg.slip_min, "Lower bound of the randomized slip coefficient (implies --randomize)");
    opt(s, "--out", eg.out, "Report directory");
    opt(s, "--workers", eg.workers, "Worker threads (results do not depend on it)");
    s->callback([&] { action = [&] { return eval_gait_cmd(eg, run); }; });
  }

  ReplayArgs rp;
  {
    auto* s = app.add_subcommand("replay", "Re-simulate a trajectory file and check it against its recorded outcome");
    s->add_option("file", rp.file, "Trajectory file")->required()->check(CLI::ExistingFile);
    opt(s, "--render", rp.render, "text or none")->check(CLI::IsMember({"text", "none"}));
    opt(s, "--out", rp.out, "Also write the report here");
    opt(s, "--tolerance", rp.tolerance, "Final-pose tolerance in metres");
    s->callback([&] { action = [&] { return replay_cmd(rp); }; });
  }

  std::string ckpt;
  {
    auto* s = app.add_subcommand("inspect-ckpt", "Print a checkpoint's kind, architecture, version and checksum");
    s->add_option("file", ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
    s->callback([&] { action = [&] { return inspect_cmd(ckpt); }; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }
  try {
    return action();
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const FormatError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
}
