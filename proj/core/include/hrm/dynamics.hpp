#pragma once

// The two-timescale recurrence. A segment runs N cycles of T low-level steps;
// only the last low-level step and the last high-level step are recorded for
// differentiation, everything before them is computed as constants.

#include <optional>
#include <span>
#include <vector>

#include "hrm/config.hpp"
#include "hrm/errors.hpp"
#include "hrm/model.hpp"
#include "hrm/rng.hpp"

namespace hrm {

// Fixed initial hidden states, one row per sequence position.
template <typename T>
struct InitialState {
  Mat<T> z_high, z_low;  // [seq, d]
};

template <typename T>
InitialState<T> init_carry(const ModelConfig& cfg, Rng& rng) {
  InitialState<T> s;
  s.z_high.resize(cfg.seq_len, cfg.hidden_dim);
  s.z_low.resize(cfg.seq_len, cfg.hidden_dim);
  for (Eigen::Index i = 0; i < s.z_high.size(); ++i) s.z_high.data()[i] = static_cast<T>(rng.truncated_normal(1.0));
  for (Eigen::Index i = 0; i < s.z_low.size(); ++i) s.z_low.data()[i] = static_cast<T>(rng.truncated_normal(1.0));
  return s;
}

// State handed between segments. Values only; `severed` is false solely for
// states that still belong to a recorded segment.
template <typename T>
struct CarryState {
  Mat<T> z_high, z_low;  // [batch * seq, d]
  bool severed = true;

  int batch(int seq_len) const { return static_cast<int>(z_high.rows()) / seq_len; }
};

template <typename T>
struct Model {
  ModelConfig config;
  Parameters<T> params;
  InitialState<T> initial;
  RopeTable<T> rope;

  Model() = default;
  Model(const ModelConfig& cfg, Parameters<T> p, InitialState<T> init)
      : config(cfg), params(std::move(p)), initial(std::move(init)),
        rope(cfg.seq_len, cfg.head_dim(), cfg.rope_base) {}

  static Model create(const ModelConfig& cfg) {
    cfg.validate();
    Rng rng(derive_seed(cfg.seed, 0));
    auto params = init_params<T>(cfg, rng);
    Rng carry_rng(derive_seed(cfg.seed, 1));
    auto init = init_carry<T>(cfg, carry_rng);
    return Model(cfg, std::move(params), std::move(init));
  }

  LayerShape<T> shape() const { return layer_shape(config, rope); }

  CarryState<T> fresh_carry(int batch) const {
    CarryState<T> c;
    c.z_high = initial.z_high.replicate(batch, 1);
    c.z_low = initial.z_low.replicate(batch, 1);
    if (config.arch == Arch::kRecurrent) c.z_high.setZero();
    return c;
  }

  // Overwrite one example's rows with the initial state.
  void reset_carry_rows(CarryState<T>& c, int example) const {
    const int S = config.seq_len;
    if (config.arch == Arch::kRecurrent) {
      c.z_high.middleRows(example * S, S).setZero();
    } else {
      c.z_high.middleRows(example * S, S) = initial.z_high;
    }
    c.z_low.middleRows(example * S, S) = initial.z_low;
  }

  template <typename U>
  Model<U> cast() const {
    InitialState<U> init{initial.z_high.template cast<U>(), initial.z_low.template cast<U>()};
    return Model<U>(config, params.template cast<U>(), std::move(init));
  }
};

struct StepCounters {
  int low_updates = 0;
  int high_updates = 0;
  int recorded_low = 0;
  int recorded_high = 0;
};

// Snapshots (i, z_L^i, z_H^i) for i = 0..N*T.
template <typename T>
struct StateTrace {
  std::vector<int> step;
  std::vector<Mat<T>> z_low, z_high;

  void push(int i, const Mat<T>& low, const Mat<T>& high) {
    step.push_back(i);
    z_low.push_back(low);
    z_high.push_back(high);
  }
  std::size_t size() const { return step.size(); }
};

// Everything the backward pass through the recorded steps needs.
template <typename T>
struct SegmentRecord {
  std::vector<int> tokens;
  Mat<T> z_out;            // final high-level state (or stack output)
  StackCache<T> low_cache;
  StackCache<T> high_cache;
};

template <typename T>
struct SegmentResult {
  CarryState<T> carry;
  Mat<T> logits;    // [batch * seq, vocab]
  Mat<T> q_logits;  // [batch, 2]: halt, continue
  std::optional<SegmentRecord<T>> record;
  std::optional<StateTrace<T>> trace;
  StepCounters counters;

  T q_halt(int b) const { return sigmoid(q_logits(b, 0)); }
  T q_continue(int b) const { return sigmoid(q_logits(b, 1)); }
};

template <typename T>
Mat<T> l_step(const Mat<T>& z_low, const Mat<T>& z_high, const Mat<T>& x_embed,
              const Model<T>& m, StackCache<T>* cache = nullptr) {
  return module_forward<T>({&z_low, &z_high, &x_embed}, m.params.low, m.shape(), cache);
}

template <typename T>
Mat<T> h_step(const Mat<T>& z_high, const Mat<T>& z_low, const Model<T>& m,
              StackCache<T>* cache = nullptr) {
  return module_forward<T>({&z_high, &z_low}, m.params.high, m.shape(), cache);
}

// One forward pass. With `record` the final low- and high-level updates keep
// their caches for segment_backward; the returned carry is always severed.
template <typename T>
SegmentResult<T> segment_forward(const Model<T>& m, const CarryState<T>& carry,
                                 std::span<const int> tokens, bool record,
                                 bool capture_trace = false) {
  if (!carry.severed) throw ContractError("segment_forward requires a severed carry");
  const ModelConfig& cfg = m.config;
  if (tokens.size() != static_cast<std::size_t>(carry.z_high.rows())) {
    throw InputError("token count does not match carry rows");
  }
  const LayerShape<T> shape = m.shape();
  const Mat<T> x = embed_input<T>(tokens, m.params.embed);

  SegmentResult<T> out;
  std::optional<SegmentRecord<T>> rec;
  if (record) {
    rec.emplace();
    rec->tokens.assign(tokens.begin(), tokens.end());
  }
  if (capture_trace) out.trace.emplace();

  Mat<T> z_out;
  switch (cfg.arch) {
    case Arch::kHrm: {
      Mat<T> zl = carry.z_low;
      Mat<T> zh = carry.z_high;
      if (out.trace) out.trace->push(0, zl, zh);
      const int total = cfg.cycles * cfg.low_steps;
      for (int i = 0; i + 1 < total; ++i) {
        zl = l_step(zl, zh, x, m);
        ++out.counters.low_updates;
        if ((i + 1) % cfg.low_steps == 0) {
          zh = h_step(zh, zl, m);
          ++out.counters.high_updates;
        }
        if (out.trace) out.trace->push(i + 1, zl, zh);
      }
      zl = l_step(zl, zh, x, m, rec ? &rec->low_cache : nullptr);
      zh = h_step(zh, zl, m, rec ? &rec->high_cache : nullptr);
      ++out.counters.low_updates;
      ++out.counters.high_updates;
      if (rec) {
        ++out.counters.recorded_low;
        ++out.counters.recorded_high;
      }
      if (out.trace) out.trace->push(total, zl, zh);
      out.carry.z_low = std::move(zl);
      out.carry.z_high = zh;
      z_out = std::move(zh);
      break;
    }
    case Arch::kFeedforward: {
      z_out = stack_forward(x, m.params.low, shape, rec ? &rec->low_cache : nullptr);
      out.counters.low_updates = 1;
      if (rec) out.counters.recorded_low = 1;
      out.carry.z_low = carry.z_low;
      out.carry.z_high = z_out;
      break;
    }
    case Arch::kRecurrent: {
      Mat<T> z = carry.z_high;
      if (out.trace) out.trace->push(0, z, z);
      for (int i = 0; i + 1 < cfg.baseline_loops; ++i) {
        z = module_forward<T>({&z, &x}, m.params.low, shape);
        ++out.counters.low_updates;
        if (out.trace) out.trace->push(i + 1, z, z);
      }
      z = module_forward<T>({&z, &x}, m.params.low, shape, rec ? &rec->low_cache : nullptr);
      ++out.counters.low_updates;
      if (rec) out.counters.recorded_low = 1;
      if (out.trace) out.trace->push(cfg.baseline_loops, z, z);
      out.carry.z_low = carry.z_low;
      out.carry.z_high = z;
      z_out = std::move(z);
      break;
    }
  }
  out.carry.severed = true;
  out.logits = output_head(z_out, m.params.head);
  out.q_logits = q_logits(z_out, m.params.q_head, cfg.seq_len);
  if (rec) {
    rec->z_out = std::move(z_out);
    out.record = std::move(rec);
  }
  return out;
}

// Accumulates parameter gradients given loss gradients w.r.t. the logits and
// the pre-sigmoid Q logits. Gradient stops at the segment's input carry.
template <typename T>
void segment_backward(const Model<T>& m, const SegmentRecord<T>& rec, const Mat<T>& d_logits,
                      const Mat<T>& d_q_logits, Parameters<T>& grads) {
  const ModelConfig& cfg = m.config;
  const LayerShape<T> shape = m.shape();
  const int S = cfg.seq_len;

  grads.head.noalias() += rec.z_out.transpose() * d_logits;
  Mat<T> dz = d_logits * m.params.head.transpose();

  grads.q_head.noalias() += summary_rows(rec.z_out, S).transpose() * d_q_logits;
  const Mat<T> dsummary = d_q_logits * m.params.q_head.transpose();
  for (Eigen::Index b = 0; b < dsummary.rows(); ++b) dz.row(b * S) += dsummary.row(b);

  Mat<T> dx;
  if (cfg.arch == Arch::kHrm) {
    // H input is z_H(prev) + z_L(final); only the z_L branch is live.
    const Mat<T> dzl = stack_backward(rec.high_cache, m.params.high, shape, std::move(dz), grads.high);
    dx = stack_backward(rec.low_cache, m.params.low, shape, dzl, grads.low);
  } else {
    dx = stack_backward(rec.low_cache, m.params.low, shape, std::move(dz), grads.low);
  }
  embed_backward<T>(rec.tokens, dx, grads.embed);
}

// Stand-alone baseline pass from a zero state: feedforward applies the stack
// once; recurrent applies it `loops` times with shared weights.
template <typename T>
Mat<T> baseline_forward(Arch variant, int loops, const Parameters<T>& params,
                        const LayerShape<T>& shape, std::span<const int> tokens) {
  const Mat<T> x = embed_input<T>(tokens, params.embed);
  Mat<T> z;
  if (variant == Arch::kFeedforward) {
    z = stack_forward(x, params.low, shape);
  } else if (variant == Arch::kRecurrent) {
    z = Mat<T>::Zero(x.rows(), x.cols());
    for (int i = 0; i < loops; ++i) z = module_forward<T>({&z, &x}, params.low, shape);
  } else {
    throw InputError("baseline_forward expects a baseline variant");
  }
  return output_head(z, params.head);
}

}  // namespace hrm
