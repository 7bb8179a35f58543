#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "hrm/config.hpp"
#include "hrm/errors.hpp"
#include "hrm/layers.hpp"
#include "hrm/rng.hpp"
#include "hrm/tensor.hpp"

namespace hrm {

enum class ParamGroup { kInput, kLow, kHigh, kOutput, kQHead };

std::string to_string(ParamGroup g);

// All learnable weights. There are no bias vectors and no normalization
// scales anywhere. For the baselines `low` holds the block stack and `high`
// is empty.
template <typename T>
struct Parameters {
  Mat<T> embed;                        // [vocab, d]
  std::vector<BlockWeights<T>> low;    // L-module blocks
  std::vector<BlockWeights<T>> high;   // H-module blocks
  Mat<T> head;                         // [d, vocab]
  Mat<T> q_head;                       // [d, 2]

  // f(group, name, matrix) over every tensor in a fixed order.
  template <typename F>
  void for_each(F&& f) {
    f(ParamGroup::kInput, std::string("embed"), embed);
    for (std::size_t i = 0; i < low.size(); ++i) {
      low[i].for_each([&](const char* n, Mat<T>& m) {
        f(ParamGroup::kLow, "low." + std::to_string(i) + "." + n, m);
      });
    }
    for (std::size_t i = 0; i < high.size(); ++i) {
      high[i].for_each([&](const char* n, Mat<T>& m) {
        f(ParamGroup::kHigh, "high." + std::to_string(i) + "." + n, m);
      });
    }
    f(ParamGroup::kOutput, std::string("head"), head);
    f(ParamGroup::kQHead, std::string("q_head"), q_head);
  }

  template <typename F>
  void for_each(F&& f) const {
    const_cast<Parameters*>(this)->for_each(
        [&](ParamGroup g, const std::string& n, Mat<T>& m) { f(g, n, static_cast<const Mat<T>&>(m)); });
  }

  std::size_t count() const {
    std::size_t n = 0;
    for_each([&](ParamGroup, const std::string&, const Mat<T>& m) { n += static_cast<std::size_t>(m.size()); });
    return n;
  }

  Parameters zeros_like() const {
    Parameters z = *this;
    z.for_each([](ParamGroup, const std::string&, Mat<T>& m) { m.setZero(); });
    return z;
  }

  template <typename U>
  Parameters<U> cast() const {
    Parameters<U> out;
    out.embed = embed.template cast<U>();
    auto cast_blocks = [](const std::vector<BlockWeights<T>>& src) {
      std::vector<BlockWeights<U>> dst(src.size());
      for (std::size_t i = 0; i < src.size(); ++i) {
        dst[i].wq = src[i].wq.template cast<U>();
        dst[i].wk = src[i].wk.template cast<U>();
        dst[i].wv = src[i].wv.template cast<U>();
        dst[i].wo = src[i].wo.template cast<U>();
        dst[i].w_gate = src[i].w_gate.template cast<U>();
        dst[i].w_up = src[i].w_up.template cast<U>();
        dst[i].w_down = src[i].w_down.template cast<U>();
      }
      return dst;
    };
    out.low = cast_blocks(low);
    out.high = cast_blocks(high);
    out.head = head.template cast<U>();
    out.q_head = q_head.template cast<U>();
    return out;
  }
};

// Truncated LeCun normal: N(0, 1/fan_in) resampled outside +-2 std.
template <typename T>
Mat<T> lecun_matrix(int fan_in, int fan_out, Rng& rng) {
  Mat<T> m(fan_in, fan_out);
  const double stddev = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(rng.truncated_normal(stddev));
  return m;
}

template <typename T>
Parameters<T> init_params(const ModelConfig& cfg, Rng& rng) {
  const int d = cfg.hidden_dim;
  const int inner = cfg.inner_dim();
  Parameters<T> p;
  // The embedding is a lookup, so it is drawn with the hidden width as fan-in;
  // after the sqrt(d) input scale rows have roughly unit-variance entries.
  p.embed.resize(cfg.vocab_size, d);
  {
    const double stddev = 1.0 / std::sqrt(static_cast<double>(d));
    for (Eigen::Index i = 0; i < p.embed.size(); ++i) p.embed.data()[i] = static_cast<T>(rng.truncated_normal(stddev));
  }
  auto make_blocks = [&](int count) {
    std::vector<BlockWeights<T>> blocks(static_cast<std::size_t>(count));
    for (auto& b : blocks) {
      b.wq = lecun_matrix<T>(d, d, rng);
      b.wk = lecun_matrix<T>(d, d, rng);
      b.wv = lecun_matrix<T>(d, d, rng);
      b.wo = lecun_matrix<T>(d, d, rng);
      b.w_gate = lecun_matrix<T>(d, inner, rng);
      b.w_up = lecun_matrix<T>(d, inner, rng);
      b.w_down = lecun_matrix<T>(inner, d, rng);
    }
    return blocks;
  };
  if (cfg.arch == Arch::kHrm) {
    p.low = make_blocks(cfg.blocks_per_module);
    p.high = make_blocks(cfg.blocks_per_module);
  } else {
    p.low = make_blocks(cfg.baseline_depth);
  }
  p.head = lecun_matrix<T>(d, cfg.vocab_size, rng);
  p.q_head = lecun_matrix<T>(d, 2, rng);
  return p;
}

// Rows are embedding-table rows scaled by sqrt(d).
template <typename T>
Mat<T> embed_input(std::span<const int> tokens, const Mat<T>& embed) {
  const Eigen::Index d = embed.cols();
  const T scale = std::sqrt(static_cast<T>(d));
  Mat<T> out(static_cast<Eigen::Index>(tokens.size()), d);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const int t = tokens[i];
    if (t < 0 || t >= embed.rows()) {
      throw InputError("token id " + std::to_string(t) + " outside vocabulary of " +
                       std::to_string(embed.rows()));
    }
    out.row(static_cast<Eigen::Index>(i)) = embed.row(t) * scale;
  }
  return out;
}

template <typename T>
void embed_backward(std::span<const int> tokens, const Mat<T>& d_out, Mat<T>& d_embed) {
  const T scale = std::sqrt(static_cast<T>(d_embed.cols()));
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    d_embed.row(tokens[i]) += d_out.row(static_cast<Eigen::Index>(i)) * scale;
  }
}

// Element-wise sum of the inputs followed by the block stack. Inputs are
// summed in the given order.
template <typename T>
Mat<T> module_forward(std::span<const Mat<T>* const> inputs,
                      const std::vector<BlockWeights<T>>& blocks, const LayerShape<T>& s,
                      StackCache<T>* cache = nullptr) {
  if (inputs.empty()) throw InputError("module_forward needs at least one input");
  Mat<T> sum = *inputs[0];
  for (std::size_t i = 1; i < inputs.size(); ++i) {
    if (inputs[i]->rows() != sum.rows() || inputs[i]->cols() != sum.cols()) {
      throw InputError("module_forward input shape mismatch");
    }
    sum += *inputs[i];
  }
  return stack_forward(std::move(sum), blocks, s, cache);
}

template <typename T>
Mat<T> module_forward(std::initializer_list<const Mat<T>*> inputs,
                      const std::vector<BlockWeights<T>>& blocks, const LayerShape<T>& s,
                      StackCache<T>* cache = nullptr) {
  return module_forward<T>(std::span<const Mat<T>* const>(inputs.begin(), inputs.size()), blocks, s, cache);
}

// Pre-normalization scores, one row per position.
template <typename T>
Mat<T> output_head(const Mat<T>& z, const Mat<T>& head) {
  return z * head;
}

// Row 0 of each example (position 0) summarizes the sequence for the Q-head.
template <typename T>
Mat<T> summary_rows(const Mat<T>& z, int seq_len) {
  const Eigen::Index batch = z.rows() / seq_len;
  Mat<T> out(batch, z.cols());
  for (Eigen::Index b = 0; b < batch; ++b) out.row(b) = z.row(b * seq_len);
  return out;
}

// Returns pre-sigmoid Q logits [batch, 2]: column 0 halt, column 1 continue.
template <typename T>
Mat<T> q_logits(const Mat<T>& z, const Mat<T>& q_head, int seq_len) {
  return summary_rows(z, seq_len) * q_head;
}

template <typename T>
LayerShape<T> layer_shape(const ModelConfig& cfg, const RopeTable<T>& rope) {
  LayerShape<T> s;
  s.seq_len = cfg.seq_len;
  s.n_heads = cfg.n_heads;
  s.rms_eps = static_cast<T>(cfg.rms_eps);
  s.rope = &rope;
  return s;
}

}  // namespace hrm
