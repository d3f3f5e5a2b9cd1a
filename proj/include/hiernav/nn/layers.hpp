#pragma once

#include <Eigen/Core>

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hiernav/core/errors.hpp"
#include "hiernav/core/rng.hpp"

namespace hiernav::nn {

using Index = Eigen::Index;
template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <class S>
using ConstMatMap = Eigen::Map<const Mat<S>>;
template <class S>
using MatMap = Eigen::Map<Mat<S>>;
template <class S>
using ConstVecMap = Eigen::Map<const Vec<S>>;
template <class S>
using VecMap = Eigen::Map<Vec<S>>;

/// Dense layer y = W x + b. W is (out x in), column-major at `offset`,
/// followed by b.
struct DenseLayout {
  Index in = 0, out = 0, offset = 0;
  Index size() const { return out * in + out; }
};

/// Single-layer GRU. Gate blocks are stacked [update z; reset r; candidate n].
struct GruLayout {
  Index in = 0, hidden = 0, offset = 0;
  Index wx() const { return offset; }
  Index wh() const { return offset + 3 * hidden * in; }
  Index bias() const { return wh() + 3 * hidden * hidden; }
  Index size() const { return 3 * hidden * (in + hidden + 1); }
};

/// Hands out consecutive slices of a flat parameter vector.
class ParamAllocator {
 public:
  DenseLayout dense(Index in, Index out) {
    DenseLayout d{in, out, next_};
    next_ += d.size();
    return d;
  }
  GruLayout gru(Index in, Index hidden) {
    GruLayout g{in, hidden, next_};
    next_ += g.size();
    return g;
  }
  Index vector(Index n) {
    const Index at = next_;
    next_ += n;
    return at;
  }
  Index total() const { return next_; }

 private:
  Index next_ = 0;
};

template <class S>
void check_size(std::span<const S> p, Index needed, const char* what) {
  if (static_cast<Index>(p.size()) < needed)
    throw ConfigError(std::string(what) + ": parameter vector too short (" + std::to_string(p.size()) + " < " +
                      std::to_string(needed) + ")");
}

// ---------------------------------------------------------------------------
// Dense

template <class S>
Mat<S> dense_forward(std::span<const S> p, const DenseLayout& d, const Mat<S>& x) {
  if (x.rows() != d.in)
    throw ConfigError("dense: input has " + std::to_string(x.rows()) + " rows, layer expects " + std::to_string(d.in));
  ConstMatMap<S> w(p.data() + d.offset, d.out, d.in);
  ConstVecMap<S> b(p.data() + d.offset + d.out * d.in, d.out);
  Mat<S> y = w * x;
  y.colwise() += b;
  return y;
}

// Accumulates dW, db into g; returns dL/dx.
template <class S>
Mat<S> dense_backward(std::span<const S> p, std::span<S> g, const DenseLayout& d, const Mat<S>& x, const Mat<S>& dy) {
  ConstMatMap<S> w(p.data() + d.offset, d.out, d.in);
  MatMap<S> gw(g.data() + d.offset, d.out, d.in);
  VecMap<S> gb(g.data() + d.offset + d.out * d.in, d.out);
  // products go through aligned temporaries: Eigen picks kernels by the
  // destination's alignment, which would make results depend on the heap
  const Mat<S> dw = dy * x.transpose();
  const Mat<S> db = dy.rowwise().sum();
  gw += dw;
  gb += db;
  return w.transpose() * dy;
}

template <class S>
void dense_init(std::span<S> p, const DenseLayout& d, CounterRng& rng, double gain) {
  const double scale = gain / std::sqrt(static_cast<double>(d.in));
  for (Index i = 0; i < d.out * d.in; ++i) p[d.offset + i] = static_cast<S>(scale * rng.normal());
  for (Index i = 0; i < d.out; ++i) p[d.offset + d.out * d.in + i] = S(0);
}

// ---------------------------------------------------------------------------
// MLP: tanh on hidden layers, optional tanh on the output.

struct MlpLayout {
  std::vector<DenseLayout> layers;
  bool tanh_output = false;

  Index in() const { return layers.front().in; }
  Index out() const { return layers.back().out; }

  static MlpLayout make(ParamAllocator& alloc, const std::vector<Index>& sizes, bool tanh_output) {
    if (sizes.size() < 2) throw ConfigError("mlp needs at least input and output sizes");
    MlpLayout m;
    m.tanh_output = tanh_output;
    for (std::size_t i = 0; i + 1 < sizes.size(); ++i) m.layers.push_back(alloc.dense(sizes[i], sizes[i + 1]));
    return m;
  }

  bool activated(std::size_t layer) const { return layer + 1 < layers.size() || tanh_output; }
};

template <class S>
struct MlpCache {
  std::vector<Mat<S>> acts;  // acts[0] = input, acts[i+1] = output of layer i
};

template <class S>
Mat<S> mlp_forward(std::span<const S> p, const MlpLayout& m, const Mat<S>& x, MlpCache<S>* cache = nullptr) {
  Mat<S> a = x;
  if (cache) {
    cache->acts.clear();
    cache->acts.push_back(x);
  }
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    a = dense_forward(p, m.layers[i], a);
    if (m.activated(i)) a = a.array().tanh().matrix();
    if (cache) cache->acts.push_back(a);
  }
  return a;
}

template <class S>
Mat<S> mlp_backward(std::span<const S> p, std::span<S> g, const MlpLayout& m, const MlpCache<S>& cache, Mat<S> dy) {
  for (std::size_t k = m.layers.size(); k-- > 0;) {
    if (m.activated(k)) dy = (dy.array() * (S(1) - cache.acts[k + 1].array().square())).matrix();
    dy = dense_backward(p, g, m.layers[k], cache.acts[k], dy);
  }
  return dy;
}

template <class S>
void mlp_init(std::span<S> p, const MlpLayout& m, CounterRng& rng, double output_gain) {
  for (std::size_t i = 0; i < m.layers.size(); ++i)
    dense_init(p, m.layers[i], rng, i + 1 == m.layers.size() ? output_gain : 1.0);
}

// ---------------------------------------------------------------------------
// GRU cell

template <class S>
struct GruStep {
  Mat<S> x, h, z, r, n, rh;
};

template <class S>
Mat<S> sigmoid(const Mat<S>& a) {
  return (S(1) / (S(1) + (-a.array()).exp())).matrix();
}

/// h' = (1 - z) * h + z * n, with
/// z = sig(Wx_z x + Wh_z h + b_z), r = sig(Wx_r x + Wh_r h + b_r),
/// n = tanh(Wx_n x + Wh_n (r * h) + b_n).
template <class S>
Mat<S> gru_forward(std::span<const S> p, const GruLayout& g, const Mat<S>& x, const Mat<S>& h,
                   GruStep<S>* cache = nullptr) {
  const Index H = g.hidden;
  if (x.rows() != g.in || h.rows() != H || x.cols() != h.cols())
    throw ConfigError("gru: shape mismatch (input " + std::to_string(x.rows()) + "x" + std::to_string(x.cols()) +
                      ", hidden " + std::to_string(h.rows()) + "x" + std::to_string(h.cols()) + ")");
  ConstMatMap<S> wx(p.data() + g.wx(), 3 * H, g.in);
  ConstMatMap<S> wh(p.data() + g.wh(), 3 * H, H);
  ConstVecMap<S> b(p.data() + g.bias(), 3 * H);
  Mat<S> gx = wx * x;
  gx.colwise() += b;
  const Mat<S> gh = wh.topRows(2 * H) * h;
  Mat<S> z = sigmoid<S>(gx.topRows(H) + gh.topRows(H));
  Mat<S> r = sigmoid<S>(gx.middleRows(H, H) + gh.bottomRows(H));
  Mat<S> rh = (r.array() * h.array()).matrix();
  Mat<S> n = (gx.bottomRows(H) + wh.bottomRows(H) * rh).array().tanh().matrix();
  Mat<S> out = ((S(1) - z.array()) * h.array() + z.array() * n.array()).matrix();
  if (cache) *cache = {x, h, std::move(z), std::move(r), std::move(n), std::move(rh)};
  return out;
}

// Accumulates parameter gradients; returns (dx, dh_prev).
template <class S>
std::pair<Mat<S>, Mat<S>> gru_backward(std::span<const S> p, std::span<S> grad, const GruLayout& g,
                                       const GruStep<S>& c, const Mat<S>& dh_out) {
  const Index H = g.hidden;
  ConstMatMap<S> wx(p.data() + g.wx(), 3 * H, g.in);
  ConstMatMap<S> wh(p.data() + g.wh(), 3 * H, H);
  MatMap<S> gwx(grad.data() + g.wx(), 3 * H, g.in);
  MatMap<S> gwh(grad.data() + g.wh(), 3 * H, H);
  VecMap<S> gb(grad.data() + g.bias(), 3 * H);

  const auto z = c.z.array();
  const auto r = c.r.array();
  const auto n = c.n.array();
  const auto h = c.h.array();
  const auto dho = dh_out.array();

  Mat<S> dgates(3 * H, c.x.cols());
  Mat<S> dn_pre = (dho * z * (S(1) - n.square())).matrix();
  dgates.bottomRows(H) = dn_pre;
  dgates.topRows(H) = (dho * (n - h) * z * (S(1) - z)).matrix();
  Mat<S> drh = wh.bottomRows(H).transpose() * dn_pre;
  dgates.middleRows(H, H) = (drh.array() * h * r * (S(1) - r)).matrix();

  Mat<S> dh = (dho * (S(1) - z) + drh.array() * r).matrix();
  dh.noalias() += wh.topRows(2 * H).transpose() * dgates.topRows(2 * H);

  const Mat<S> dwx = dgates * c.x.transpose();
  const Mat<S> dwh_zr = dgates.topRows(2 * H) * c.h.transpose();
  const Mat<S> dwh_n = dn_pre * c.rh.transpose();
  const Mat<S> db = dgates.rowwise().sum();
  gwx += dwx;
  gb += db;
  gwh.topRows(2 * H) += dwh_zr;
  gwh.bottomRows(H) += dwh_n;
  Mat<S> dx = wx.transpose() * dgates;
  return {std::move(dx), std::move(dh)};
}

template <class S>
void gru_init(std::span<S> p, const GruLayout& g, CounterRng& rng) {
  const double sx = 1.0 / std::sqrt(static_cast<double>(g.in));
  const double sh = 1.0 / std::sqrt(static_cast<double>(g.hidden));
  for (Index i = 0; i < 3 * g.hidden * g.in; ++i) p[g.wx() + i] = static_cast<S>(sx * rng.normal());
  for (Index i = 0; i < 3 * g.hidden * g.hidden; ++i) p[g.wh() + i] = static_cast<S>(sh * rng.normal());
  for (Index i = 0; i < 3 * g.hidden; ++i) p[g.bias() + i] = S(0);
}

}  // namespace hiernav::nn
