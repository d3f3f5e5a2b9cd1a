#pragma once

#include <array>
#include <span>
#include <vector>

#include <json.hpp>

#include "hiernav/nn/gmm.hpp"
#include "hiernav/nn/layers.hpp"
#include "hiernav/nn/params.hpp"

namespace hiernav::nn {

/// Navigator network: range-scan embedding (tanh dense) concatenated with the
/// scalar features, a GRU (or, for the ablation, a dense tanh trunk), and a
/// GMM head over (v, w).
///
/// Input columns are [ranges (n_ranges) | scalars (n_scalars)].
class NavigatorNet {
 public:
  NavigatorNet() = default;

  explicit NavigatorNet(const nlohmann::json& arch) {
    if (arch.value("kind", "") != "navigator") throw ConfigError("arch is not a navigator network");
    recurrent_ = arch.at("recurrent").get<bool>();
    ranges_ = arch.at("ranges").get<Index>();
    scalars_ = arch.at("scalars").get<Index>();
    embed_ = arch.at("embed").get<Index>();
    hidden_ = arch.at("hidden").get<Index>();
    gmm_.components = arch.at("gmm_k").get<int>();
    ParamAllocator alloc;
    embed_layer_ = alloc.dense(ranges_, embed_);
    if (recurrent_)
      gru_ = alloc.gru(embed_ + scalars_, hidden_);
    else
      trunk_ = alloc.dense(embed_ + scalars_, hidden_);
    head_ = alloc.dense(hidden_, gmm_.raw_size());
    size_ = alloc.total();
    arch_ = arch;
  }

  static nlohmann::json make_arch(bool recurrent, Index ranges = 72, Index scalars = 2, Index embed = 64,
                                  Index hidden = 64, int gmm_k = 5) {
    return {{"kind", "navigator"}, {"recurrent", recurrent}, {"ranges", ranges}, {"scalars", scalars},
            {"embed", embed},      {"hidden", hidden},       {"gmm_k", gmm_k}};
  }

  PolicyParams init(std::uint64_t seed) const {
    PolicyParams p;
    p.arch = arch_;
    p.values.assign(size_, 0.0f);
    CounterRng rng(seed, 0x7a1, 0);
    std::span<float> v(p.values);
    dense_init(v, embed_layer_, rng, 1.0);
    if (recurrent_)
      gru_init(v, gru_, rng);
    else
      dense_init(v, trunk_, rng, 1.0);
    dense_init(v, head_, rng, 0.1);
    return p;
  }

  void check(const PolicyParams& p) const {
    if (static_cast<Index>(p.values.size()) != size_)
      throw ConfigError("navigator: checkpoint has " + std::to_string(p.values.size()) + " values, arch needs " +
                        std::to_string(size_));
  }

  template <class S>
  struct StepCache {
    Mat<S> ranges, emb, x, feat;
    GruStep<S> gru;
  };

  template <class S>
  struct SeqCache {
    std::vector<StepCache<S>> steps;
  };

  /// inputs[t] is (n_ranges + n_scalars) x batch. Returns raw head outputs per step.
  template <class S>
  std::vector<Mat<S>> forward(std::span<const S> p, const std::vector<Mat<S>>& inputs, SeqCache<S>* cache = nullptr) const {
    std::vector<Mat<S>> out;
    out.reserve(inputs.size());
    if (inputs.empty()) return out;
    const Index batch = inputs.front().cols();
    Mat<S> h = Mat<S>::Zero(hidden_, batch);
    if (cache) cache->steps.assign(inputs.size(), {});
    for (std::size_t t = 0; t < inputs.size(); ++t) {
      const Mat<S>& in = inputs[t];
      if (in.rows() != ranges_ + scalars_)
        throw ConfigError("navigator: input has " + std::to_string(in.rows()) + " features, expected " +
                          std::to_string(ranges_ + scalars_));
      Mat<S> r = in.topRows(ranges_);
      Mat<S> emb = dense_forward(p, embed_layer_, r).array().tanh().matrix();
      Mat<S> x(embed_ + scalars_, batch);
      x.topRows(embed_) = emb;
      x.bottomRows(scalars_) = in.bottomRows(scalars_);
      Mat<S> feat;
      StepCache<S>* c = cache ? &cache->steps[t] : nullptr;
      if (recurrent_) {
        h = gru_forward(p, gru_, x, h, c ? &c->gru : nullptr);
        feat = h;
      } else {
        feat = dense_forward(p, trunk_, x).array().tanh().matrix();
      }
      out.push_back(dense_forward(p, head_, feat));
      if (c) {
        c->ranges = std::move(r);
        c->emb = std::move(emb);
        c->x = std::move(x);
        c->feat = std::move(feat);
      }
    }
    return out;
  }

  /// Backpropagates d(loss)/d(raw) for every step through time into g.
  template <class S>
  void backward(std::span<const S> p, std::span<S> g, const SeqCache<S>& cache, const std::vector<Mat<S>>& draw) const {
    const std::size_t T = cache.steps.size();
    if (T == 0) return;
    const Index batch = draw.front().cols();
    Mat<S> dh_next = Mat<S>::Zero(hidden_, batch);
    for (std::size_t t = T; t-- > 0;) {
      const auto& c = cache.steps[t];
      Mat<S> dfeat = dense_backward(p, g, head_, c.feat, draw[t]);
      Mat<S> dx;
      if (recurrent_) {
        dfeat += dh_next;
        auto [dxi, dh] = gru_backward(p, g, gru_, c.gru, dfeat);
        dx = std::move(dxi);
        dh_next = std::move(dh);
      } else {
        Mat<S> dpre = (dfeat.array() * (S(1) - c.feat.array().square())).matrix();
        dx = dense_backward(p, g, trunk_, c.x, dpre);
      }
      Mat<S> demb = (dx.topRows(embed_).array() * (S(1) - c.emb.array().square())).matrix();
      dense_backward(p, g, embed_layer_, c.ranges, demb);
    }
  }

  /// Mean GMM NLL over all (step, column) pairs; targets[t] is 2 x batch.
  /// Adds the gradient of the mean into `grad` when non-empty.
  template <class S>
  double sequence_loss(std::span<const S> p, const std::vector<Mat<S>>& inputs, const std::vector<Mat<S>>& targets,
                       std::span<S> grad = {}) const {
    SeqCache<S> cache;
    const bool want_grad = !grad.empty();
    const auto raw = forward(p, inputs, want_grad ? &cache : nullptr);
    const Index batch = inputs.front().cols();
    const double scale = 1.0 / static_cast<double>(inputs.size() * batch);
    std::vector<Mat<S>> draw;
    if (want_grad) draw.assign(raw.size(), Mat<S>::Zero(gmm_.raw_size(), batch));
    double total = 0.0;
    for (std::size_t t = 0; t < raw.size(); ++t)
      for (Index b = 0; b < batch; ++b) {
        const std::array<double, 2> target{static_cast<double>(targets[t](0, b)), static_cast<double>(targets[t](1, b))};
        total += gmm_nll<S>(gmm_, raw[t].col(b).data(), target, want_grad ? draw[t].col(b).data() : nullptr, scale);
      }
    if (want_grad) backward(p, grad, cache, draw);
    return total * scale;
  }

  bool recurrent() const { return recurrent_; }
  Index input_size() const { return ranges_ + scalars_; }
  Index n_ranges() const { return ranges_; }
  Index n_scalars() const { return scalars_; }
  Index size() const { return size_; }
  const GmmSpec& gmm() const { return gmm_; }
  const nlohmann::json& arch() const { return arch_; }

 private:
  nlohmann::json arch_;
  bool recurrent_ = true;
  Index ranges_ = 72, scalars_ = 2, embed_ = 64, hidden_ = 64, size_ = 0;
  GmmSpec gmm_;
  DenseLayout embed_layer_, trunk_, head_;
  GruLayout gru_;
};

}  // namespace hiernav::nn
