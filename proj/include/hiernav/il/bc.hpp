#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "hiernav/hierarchy.hpp"
#include "hiernav/il/demos.hpp"
#include "hiernav/nn/gmm.hpp"
#include "hiernav/nn/navigator.hpp"
#include "hiernav/nn/optim.hpp"
#include "hiernav/nn/params.hpp"

namespace hiernav::il {

enum class BcArch { Rnn, Mlp };

inline std::string_view to_string(BcArch a) { return a == BcArch::Rnn ? "bc-rnn" : "bc-mlp"; }

inline BcArch parse_bc_arch(std::string_view s) {
  if (s == "bc-rnn") return BcArch::Rnn;
  if (s == "bc-mlp") return BcArch::Mlp;
  throw ConfigError("unknown BC arch '" + std::string(s) + "' (expected bc-rnn|bc-mlp)");
}

struct BcConfig {
  BcArch arch = BcArch::Rnn;
  std::uint64_t seed = 1;
  int window = 10;             // truncated sequence length H
  int batch = 32;              // windows per minibatch
  int windows_per_epoch = 512;
  int max_epochs = 200;
  int patience = 20;           // epochs without validation improvement
  double validation_fraction = 0.2;
  double grad_clip = 1.0;
  nn::Index embed = 64;
  nn::Index hidden = 64;
  int gmm_k = 5;
  nn::AdamHyper adam{1e-3};

  nlohmann::json to_json() const {
    return {{"arch", std::string(to_string(arch))},
            {"seed", seed},
            {"window", window},
            {"batch", batch},
            {"windows_per_epoch", windows_per_epoch},
            {"max_epochs", max_epochs},
            {"patience", patience},
            {"validation_fraction", validation_fraction},
            {"grad_clip", grad_clip},
            {"embed", embed},
            {"hidden", hidden},
            {"gmm_k", gmm_k},
            {"lr", adam.lr}};
  }

  static BcConfig from_json(const nlohmann::json& j) {
    BcConfig c;
    if (j.contains("arch")) c.arch = parse_bc_arch(j["arch"].get<std::string>());
    c.seed = j.value("seed", c.seed);
    c.window = j.value("window", c.window);
    c.batch = j.value("batch", c.batch);
    c.windows_per_epoch = j.value("windows_per_epoch", c.windows_per_epoch);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.patience = j.value("patience", c.patience);
    c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
    c.grad_clip = j.value("grad_clip", c.grad_clip);
    c.embed = j.value("embed", c.embed);
    c.hidden = j.value("hidden", c.hidden);
    c.gmm_k = j.value("gmm_k", c.gmm_k);
    c.adam.lr = j.value("lr", c.adam.lr);
    if (c.window < 1 || c.batch < 1 || c.windows_per_epoch < 1 || c.max_epochs < 1 || c.gmm_k < 1)
      throw ConfigError("bc: window, batch, windows_per_epoch, max_epochs and gmm_k must be positive");
    if (c.validation_fraction < 0.0 || c.validation_fraction >= 1.0)
      throw ConfigError("bc: validation_fraction must be in [0, 1)");
    return c;
  }
};

/// Per-feature standardization fitted on the training split. Stored in the
/// checkpoint so deployment needs nothing else.
struct Normalizer {
  static constexpr double kStdFloor = 0.1;
  std::vector<double> mean, std;

  static Normalizer fit(const DemoDataset& ds, std::span<const std::size_t> which) {
    Normalizer n;
    n.mean.assign(kNavInputSize, 0.0);
    n.std.assign(kNavInputSize, 0.0);
    double count = 0.0;
    std::array<double, kNavInputSize> f{};
    for (auto i : which)
      for (const auto& r : ds.trajectories[i].records) {
        observation_features(r.obs, f.data());
        for (int k = 0; k < kNavInputSize; ++k) n.mean[k] += f[k];
        count += 1.0;
      }
    if (count == 0.0) throw ConfigError("bc: no training records");
    for (auto& m : n.mean) m /= count;
    for (auto i : which)
      for (const auto& r : ds.trajectories[i].records) {
        observation_features(r.obs, f.data());
        for (int k = 0; k < kNavInputSize; ++k) n.std[k] += sq(f[k] - n.mean[k]);
      }
    // floor in physical units (m, rad, m/s): near-constant features in small
    // datasets would otherwise turn sensor noise into huge inputs
    for (auto& s : n.std) s = std::max(std::sqrt(s / count), kStdFloor);
    return n;
  }

  template <class S>
  void apply(const Observation& o, S* out) const {
    std::array<double, kNavInputSize> f{};
    observation_features(o, f.data());
    for (int k = 0; k < kNavInputSize; ++k) out[k] = static_cast<S>((f[k] - mean[k]) / std[k]);
  }

  nlohmann::json to_json() const { return {{"mean", mean}, {"std", std}}; }
  static Normalizer from_json(const nlohmann::json& j) {
    Normalizer n;
    n.mean = j.at("mean").get<std::vector<double>>();
    n.std = j.at("std").get<std::vector<double>>();
    if (n.mean.size() != kNavInputSize || n.std.size() != kNavInputSize)
      throw FormatError("normalizer needs " + std::to_string(kNavInputSize) + " features");
    return n;
  }
};

struct BcCurveRow {
  int epoch = 0;
  double train_nll = 0.0;
  double validation_nll = 0.0;
};

struct BcResult {
  nn::PolicyParams params;  // best validation
  nlohmann::json meta;      // normalizer, window, arch name, config
  std::vector<BcCurveRow> curve;
  double best_validation_nll = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
};

namespace detail {

struct Window {
  std::size_t traj;
  std::size_t start;
};

// Builds normalized inputs/targets for a list of windows of equal length.
inline void window_batch(const DemoDataset& ds, const Normalizer& norm, std::span<const Window> ws, int len,
                         std::vector<nn::Mat<float>>& inputs, std::vector<nn::Mat<float>>& targets) {
  const auto B = static_cast<nn::Index>(ws.size());
  inputs.assign(static_cast<std::size_t>(len), nn::Mat<float>(kNavInputSize, B));
  targets.assign(static_cast<std::size_t>(len), nn::Mat<float>(2, B));
  for (nn::Index b = 0; b < B; ++b) {
    const auto& recs = ds.trajectories[ws[b].traj].records;
    for (int t = 0; t < len; ++t) {
      const auto& r = recs[ws[b].start + static_cast<std::size_t>(t)];
      norm.apply(r.obs, inputs[t].col(b).data());
      targets[t](0, b) = static_cast<float>(r.cmd.v);
      targets[t](1, b) = static_cast<float>(r.cmd.w);
    }
  }
}

// Non-overlapping windows covering each trajectory; the last one is aligned
// to the trajectory end.
inline std::vector<Window> tiling_windows(const DemoDataset& ds, std::span<const std::size_t> which, int len) {
  std::vector<Window> ws;
  for (auto i : which) {
    const std::size_t n = ds.trajectories[i].records.size();
    if (n < static_cast<std::size_t>(len)) continue;
    std::size_t s = 0;
    for (; s + len <= n; s += len) ws.push_back({i, s});
    if (s < n) ws.push_back({i, n - len});
  }
  return ws;
}

inline double mean_nll(const nn::NavigatorNet& net, std::span<const float> p, const DemoDataset& ds,
                       const Normalizer& norm, std::span<const Window> ws, int len, int batch) {
  double total = 0.0;
  std::size_t n = 0;
  std::vector<nn::Mat<float>> in, tgt;
  for (std::size_t s = 0; s < ws.size(); s += batch) {
    const auto chunk = ws.subspan(s, std::min<std::size_t>(batch, ws.size() - s));
    window_batch(ds, norm, chunk, len, in, tgt);
    total += net.sequence_loss<float>(p, in, tgt) * static_cast<double>(chunk.size());
    n += chunk.size();
  }
  return n == 0 ? std::numeric_limits<double>::quiet_NaN() : total / static_cast<double>(n);
}

}  // namespace detail

/// Behavioral cloning with a GMM head. The recurrent variant unrolls the GRU
/// over windows of H consecutive navigation ticks from a zero state; the MLP
/// ablation sees one observation per step. Returns the best-validation
/// parameters (training NLL when the validation split is empty).
inline BcResult train_bc(const DemoDataset& ds, const BcConfig& cfg,
                         const std::function<void(const BcCurveRow&)>& progress = {}) {
  if (ds.trajectories.empty()) throw ConfigError("bc: empty dataset");
  for (const auto& tr : ds.trajectories) validate(tr);
  const auto split = split_by_trajectory(ds, cfg.validation_fraction, cfg.seed);
  std::size_t shortest = std::numeric_limits<std::size_t>::max();
  for (auto i : split.train) shortest = std::min(shortest, ds.trajectories[i].records.size());
  if (shortest == 0) throw ConfigError("bc: a training trajectory has no records");
  const int len = static_cast<int>(std::min<std::size_t>(cfg.window, shortest));

  const Normalizer norm = Normalizer::fit(ds, split.train);
  const nn::NavigatorNet net(
      nn::NavigatorNet::make_arch(cfg.arch == BcArch::Rnn, SensorConstants::beams, kNavScalars, cfg.embed, cfg.hidden, cfg.gmm_k));

  // all window start positions in the training split
  std::vector<detail::Window> starts;
  for (auto i : split.train)
    for (std::size_t s = 0; s + len <= ds.trajectories[i].records.size(); ++s) starts.push_back({i, s});
  const auto train_tiles = detail::tiling_windows(ds, split.train, len);
  const auto val_tiles = detail::tiling_windows(ds, split.validation, len);

  BcResult res;
  res.meta = {{"kind", std::string(to_string(cfg.arch))},
              {"window", len},
              {"normalizer", norm.to_json()},
              {"config", cfg.to_json()},
              {"train_trajectories", split.train.size()},
              {"validation_trajectories", split.validation.size()}};
  nn::PolicyParams params = net.init(cfg.seed);
  nn::AdamState adam;
  CounterRng rng(cfg.seed, 0xbc, 0);
  std::vector<float> grad(params.values.size());
  std::vector<nn::Mat<float>> in, tgt;
  std::vector<detail::Window> mb;
  int since_best = 0;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    for (int done = 0; done < cfg.windows_per_epoch; done += cfg.batch) {
      mb.clear();
      const int b = std::min(cfg.batch, cfg.windows_per_epoch - done);
      for (int k = 0; k < b; ++k) mb.push_back(starts[rng.below(starts.size())]);
      detail::window_batch(ds, norm, mb, len, in, tgt);
      std::fill(grad.begin(), grad.end(), 0.0f);
      net.sequence_loss<float>(params.values, in, tgt, grad);
      nn::clip_grad_norm<float>(grad, cfg.grad_clip);
      nn::adam_step<float>(params.values, grad, adam, cfg.adam);
    }
    BcCurveRow row;
    row.epoch = epoch;
    row.train_nll = detail::mean_nll(net, params.values, ds, norm, train_tiles, len, 64);
    row.validation_nll =
        val_tiles.empty() ? row.train_nll : detail::mean_nll(net, params.values, ds, norm, val_tiles, len, 64);
    if (!std::isfinite(row.train_nll)) throw NumericalError("bc: training NLL became non-finite at epoch " + std::to_string(epoch));
    res.curve.push_back(row);
    if (progress) progress(row);
    if (row.validation_nll < res.best_validation_nll) {
      res.best_validation_nll = row.validation_nll;
      res.best_epoch = epoch;
      res.params = params;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  res.params.arch = net.arch();
  res.meta["best_epoch"] = res.best_epoch;
  res.meta["best_validation_nll"] = res.best_validation_nll;
  return res;
}

inline void write_bc_curve_csv(const std::string& path, const std::vector<BcCurveRow>& curve) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  out << "epoch,train_nll,validation_nll\n" << std::setprecision(9);
  for (const auto& r : curve) out << r.epoch << ',' << r.train_nll << ',' << r.validation_nll << '\n';
}

/// Deployed BC navigator. The recurrent variant re-runs the GRU from a zero
/// state over the last H observations at every call, matching the truncated
/// training windows. temperature 0 picks the heaviest component's mean.
class BcNavigator : public NavPolicy {
 public:
  BcNavigator(nn::PolicyParams params, const nlohmann::json& meta, double temperature = 0.0)
      : net_(params.arch), params_(std::move(params)), temperature_(temperature) {
    net_.check(params_);
    if (net_.input_size() != kNavInputSize)
      throw ConfigError("navigator checkpoint expects " + std::to_string(net_.input_size()) + " inputs, need " +
                        std::to_string(kNavInputSize));
    if (!meta.contains("normalizer")) throw FormatError("navigator checkpoint lacks normalization statistics");
    norm_ = Normalizer::from_json(meta["normalizer"]);
    window_ = net_.recurrent() ? meta.value("window", 10) : 1;
    name_ = meta.value("kind", net_.recurrent() ? "bc-rnn" : "bc-mlp");
  }

  static BcNavigator load(const std::string& path, double temperature = 0.0) {
    auto ck = nn::load_checkpoint(path);
    return BcNavigator(std::move(ck.params), ck.meta, temperature);
  }

  void reset(std::uint64_t episode_seed) override {
    recent_.clear();
    rng_ = CounterRng(episode_seed, 0x9a5, 0);
  }

  Command act(const NavContext& ctx) override {
    nn::Mat<float> x(kNavInputSize, 1);
    norm_.apply(ctx.obs, x.data());
    recent_.push_back(std::move(x));
    while (static_cast<int>(recent_.size()) > window_) recent_.pop_front();
    const std::vector<nn::Mat<float>> seq(recent_.begin(), recent_.end());
    const auto raw = net_.forward<float>(params_.values, seq);
    const auto c = nn::gmm_sample<float>(net_.gmm(), raw.back().data(), temperature_, &rng_);
    return {c[0], c[1]};
  }

  std::string name() const override { return name_; }

 private:
  nn::NavigatorNet net_;
  nn::PolicyParams params_;
  Normalizer norm_;
  int window_ = 10;
  double temperature_ = 0.0;
  std::string name_;
  std::deque<nn::Mat<float>> recent_;
  CounterRng rng_{0};
};

}  // namespace hiernav::il
