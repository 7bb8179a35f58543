#pragma once

// Encoder block primitives with hand-written reverse passes. Every forward
// that takes a cache pointer records what its backward needs; passing nullptr
// runs the forward without recording.

#include <cmath>
#include <vector>

#include "hrm/tensor.hpp"

namespace hrm {

template <typename T>
struct BlockWeights {
  Mat<T> wq, wk, wv, wo;         // [d, d]
  Mat<T> w_gate, w_up;           // [d, inner]
  Mat<T> w_down;                 // [inner, d]

  static BlockWeights zeros(int d, int inner) {
    BlockWeights w;
    w.wq = w.wk = w.wv = w.wo = Mat<T>::Zero(d, d);
    w.w_gate = w.w_up = Mat<T>::Zero(d, inner);
    w.w_down = Mat<T>::Zero(inner, d);
    return w;
  }

  template <typename F>
  void for_each(F&& f) {
    f("wq", wq);
    f("wk", wk);
    f("wv", wv);
    f("wo", wo);
    f("w_gate", w_gate);
    f("w_up", w_up);
    f("w_down", w_down);
  }
};

// Precomputed rotary angles for positions [0, seq_len) and pair index
// [0, head_dim / 2). Pairs are (i, i + head_dim / 2) within each head.
template <typename T>
struct RopeTable {
  Mat<T> cos, sin;

  RopeTable() = default;
  RopeTable(int seq_len, int head_dim, double base) {
    const int half = head_dim / 2;
    cos.resize(seq_len, half);
    sin.resize(seq_len, half);
    for (int p = 0; p < seq_len; ++p) {
      for (int i = 0; i < half; ++i) {
        const double freq = std::pow(base, -2.0 * i / head_dim);
        cos(p, i) = static_cast<T>(std::cos(p * freq));
        sin(p, i) = static_cast<T>(std::sin(p * freq));
      }
    }
  }
};

template <typename T>
struct LayerShape {
  int seq_len = 0;
  int n_heads = 1;
  T rms_eps = T(1e-6);
  const RopeTable<T>* rope = nullptr;
};

// ---------------------------------------------------------------- RMSNorm

template <typename T>
struct RmsCache {
  Mat<T> y;
  Vec<T> inv_rms;
};

// Row-wise x / sqrt(mean(x^2) + eps); no scale or bias.
template <typename T>
Mat<T> rms_norm(const Mat<T>& x, T eps, RmsCache<T>* cache = nullptr) {
  const Eigen::Index d = x.cols();
  Vec<T> inv = ((x.array().square().rowwise().sum() / T(d)) + eps).rsqrt().matrix();
  Mat<T> y = inv.asDiagonal() * x;
  if (cache) {
    cache->y = y;
    cache->inv_rms = std::move(inv);
  }
  return y;
}

template <typename T>
Mat<T> rms_norm_backward(const RmsCache<T>& c, const Mat<T>& dy) {
  const Eigen::Index d = dy.cols();
  const Vec<T> proj = (dy.array() * c.y.array()).rowwise().sum().matrix() / T(d);
  Mat<T> dx = dy - proj.asDiagonal() * c.y;
  return c.inv_rms.asDiagonal() * dx;
}

// ---------------------------------------------------------------- RoPE

template <typename T>
void apply_rope(Mat<T>& x, const LayerShape<T>& s, bool inverse = false) {
  const RopeTable<T>& rope = *s.rope;
  const int hd = static_cast<int>(x.cols()) / s.n_heads;
  const int half = hd / 2;
  const T sign = inverse ? T(-1) : T(1);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const int p = static_cast<int>(r % s.seq_len);
    for (int h = 0; h < s.n_heads; ++h) {
      T* v = x.row(r).data() + h * hd;
      for (int i = 0; i < half; ++i) {
        const T c = rope.cos(p, i);
        const T sn = sign * rope.sin(p, i);
        const T a = v[i];
        const T b = v[i + half];
        v[i] = a * c - b * sn;
        v[i + half] = a * sn + b * c;
      }
    }
  }
}

// ---------------------------------------------------------------- attention

template <typename T>
struct AttentionCache {
  Mat<T> x, q, k, v, o;        // q, k after rotation
  std::vector<Mat<T>> probs;   // one [seq, seq] per (batch, head)
};

template <typename T>
Mat<T> attention_forward(const Mat<T>& x, const BlockWeights<T>& w, const LayerShape<T>& s,
                         AttentionCache<T>* cache = nullptr) {
  const int d = static_cast<int>(x.cols());
  const int S = s.seq_len;
  const int batch = static_cast<int>(x.rows()) / S;
  const int hd = d / s.n_heads;
  const T scale = T(1) / std::sqrt(T(hd));

  Mat<T> q = x * w.wq;
  Mat<T> k = x * w.wk;
  Mat<T> v = x * w.wv;
  apply_rope(q, s);
  apply_rope(k, s);

  Mat<T> o(x.rows(), d);
  if (cache) cache->probs.resize(static_cast<std::size_t>(batch) * s.n_heads);
  Mat<T> scores(S, S);
  for (int b = 0; b < batch; ++b) {
    for (int h = 0; h < s.n_heads; ++h) {
      auto qb = q.block(b * S, h * hd, S, hd);
      auto kb = k.block(b * S, h * hd, S, hd);
      auto vb = v.block(b * S, h * hd, S, hd);
      scores.noalias() = (qb * kb.transpose()) * scale;
      for (int i = 0; i < S; ++i) {
        auto row = scores.row(i);
        const T mx = row.maxCoeff();
        row = (row.array() - mx).exp();
        row /= row.sum();
      }
      o.block(b * S, h * hd, S, hd).noalias() = scores * vb;
      if (cache) cache->probs[static_cast<std::size_t>(b) * s.n_heads + h] = scores;
    }
  }
  Mat<T> y = o * w.wo;
  if (cache) {
    cache->x = x;
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->o = std::move(o);
  }
  return y;
}

template <typename T>
Mat<T> attention_backward(const AttentionCache<T>& c, const BlockWeights<T>& w,
                          const LayerShape<T>& s, const Mat<T>& dy, BlockWeights<T>& grad) {
  const int d = static_cast<int>(dy.cols());
  const int S = s.seq_len;
  const int batch = static_cast<int>(dy.rows()) / S;
  const int hd = d / s.n_heads;
  const T scale = T(1) / std::sqrt(T(hd));

  grad.wo.noalias() += c.o.transpose() * dy;
  const Mat<T> d_o = dy * w.wo.transpose();

  Mat<T> dq(dy.rows(), d), dk(dy.rows(), d), dv(dy.rows(), d);
  Mat<T> dp(S, S);
  for (int b = 0; b < batch; ++b) {
    for (int h = 0; h < s.n_heads; ++h) {
      const Mat<T>& p = c.probs[static_cast<std::size_t>(b) * s.n_heads + h];
      auto dob = d_o.block(b * S, h * hd, S, hd);
      dp.noalias() = dob * c.v.block(b * S, h * hd, S, hd).transpose();
      dv.block(b * S, h * hd, S, hd).noalias() = p.transpose() * dob;
      const Vec<T> rowdot = (dp.array() * p.array()).rowwise().sum().matrix();
      dp = (p.array() * (dp.colwise() - rowdot).array()) * scale;
      dq.block(b * S, h * hd, S, hd).noalias() = dp * c.k.block(b * S, h * hd, S, hd);
      dk.block(b * S, h * hd, S, hd).noalias() = dp.transpose() * c.q.block(b * S, h * hd, S, hd);
    }
  }
  apply_rope(dq, s, /*inverse=*/true);
  apply_rope(dk, s, /*inverse=*/true);

  grad.wq.noalias() += c.x.transpose() * dq;
  grad.wk.noalias() += c.x.transpose() * dk;
  grad.wv.noalias() += c.x.transpose() * dv;
  Mat<T> dx = dq * w.wq.transpose();
  dx.noalias() += dk * w.wk.transpose();
  dx.noalias() += dv * w.wv.transpose();
  return dx;
}

// ---------------------------------------------------------------- GLU MLP

template <typename T>
struct GluCache {
  Mat<T> x, gate, up, act;
};

template <typename T>
inline T sigmoid(T z) {
  return T(1) / (T(1) + std::exp(-z));
}

// W_down(silu(W_gate x) * (W_up x)), bias-free.
template <typename T>
Mat<T> glu_forward(const Mat<T>& x, const BlockWeights<T>& w, GluCache<T>* cache = nullptr) {
  Mat<T> gate = x * w.w_gate;
  Mat<T> up = x * w.w_up;
  Mat<T> act = (gate.array() * (T(1) + (-gate.array()).exp()).inverse() * up.array()).matrix();
  Mat<T> y = act * w.w_down;
  if (cache) {
    cache->x = x;
    cache->gate = std::move(gate);
    cache->up = std::move(up);
    cache->act = std::move(act);
  }
  return y;
}

template <typename T>
Mat<T> glu_backward(const GluCache<T>& c, const BlockWeights<T>& w, const Mat<T>& dy,
                    BlockWeights<T>& grad) {
  grad.w_down.noalias() += c.act.transpose() * dy;
  const Mat<T> dact = dy * w.w_down.transpose();
  const auto g = c.gate.array();
  const Eigen::Array<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> sg = (T(1) + (-g).exp()).inverse();
  const Mat<T> dgate = (dact.array() * c.up.array() * sg * (T(1) + g * (T(1) - sg))).matrix();
  const Mat<T> dup = (dact.array() * g * sg).matrix();
  grad.w_gate.noalias() += c.x.transpose() * dgate;
  grad.w_up.noalias() += c.x.transpose() * dup;
  Mat<T> dx = dgate * w.w_gate.transpose();
  dx.noalias() += dup * w.w_up.transpose();
  return dx;
}

// ---------------------------------------------------------------- block

template <typename T>
struct BlockCache {
  AttentionCache<T> attn;
  RmsCache<T> norm1;
  GluCache<T> glu;
  RmsCache<T> norm2;
};

// Post-Norm: x <- norm(x + attn(x)); x <- norm(x + glu(x)).
template <typename T>
Mat<T> block_forward(const Mat<T>& x, const BlockWeights<T>& w, const LayerShape<T>& s,
                     BlockCache<T>* cache = nullptr) {
  Mat<T> h = x + attention_forward(x, w, s, cache ? &cache->attn : nullptr);
  Mat<T> x1 = rms_norm(h, s.rms_eps, cache ? &cache->norm1 : nullptr);
  Mat<T> h2 = x1 + glu_forward(x1, w, cache ? &cache->glu : nullptr);
  return rms_norm(h2, s.rms_eps, cache ? &cache->norm2 : nullptr);
}

template <typename T>
Mat<T> block_backward(const BlockCache<T>& c, const BlockWeights<T>& w, const LayerShape<T>& s,
                      const Mat<T>& dy, BlockWeights<T>& grad) {
  const Mat<T> dh2 = rms_norm_backward(c.norm2, dy);
  const Mat<T> dx1 = dh2 + glu_backward(c.glu, w, dh2, grad);
  const Mat<T> dh = rms_norm_backward(c.norm1, dx1);
  return dh + attention_backward(c.attn, w, s, dh, grad);
}

// ---------------------------------------------------------------- stack

template <typename T>
using StackCache = std::vector<BlockCache<T>>;

template <typename T>
Mat<T> stack_forward(Mat<T> x, const std::vector<BlockWeights<T>>& blocks,
                     const LayerShape<T>& s, StackCache<T>* cache = nullptr) {
  if (cache) cache->resize(blocks.size());
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    x = block_forward(x, blocks[i], s, cache ? &(*cache)[i] : nullptr);
  }
  return x;
}

template <typename T>
Mat<T> stack_backward(const StackCache<T>& cache, const std::vector<BlockWeights<T>>& blocks,
                      const LayerShape<T>& s, Mat<T> dy, std::vector<BlockWeights<T>>& grads) {
  for (std::size_t i = blocks.size(); i-- > 0;) {
    dy = block_backward(cache[i], blocks[i], s, dy, grads[i]);
  }
  return dy;
}

// ---------------------------------------------------------------- stablemax

// s(x) = x + 1 for x >= 0, 1 / (1 - x) otherwise; strictly increasing and
// positive, so normalizing it gives a distribution with softmax's argmax.
template <typename T>
inline T stablemax_s(T x) {
  return x >= T(0) ? x + T(1) : T(1) / (T(1) - x);
}

template <typename T>
inline T stablemax_ds(T x) {
  return x >= T(0) ? T(1) : T(1) / ((T(1) - x) * (T(1) - x));
}

template <typename T>
Vec<T> stablemax(const Vec<T>& logits) {
  Vec<T> s = logits.unaryExpr([](T x) { return stablemax_s(x); });
  return s / s.sum();
}

template <typename T>
Vec<T> softmax(const Vec<T>& logits) {
  Vec<T> e = (logits.array() - logits.maxCoeff()).exp().matrix();
  return e / e.sum();
}

}  // namespace hrm
