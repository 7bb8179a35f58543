#pragma once

// Deep supervision with Q-learned halting. Each optimizer step trains one
// segment per batch slot; slots keep their carry across steps until they
// halt, then reload a fresh example.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "hrm/dynamics.hpp"
#include "hrm/errors.hpp"
#include "hrm/tokenizer.hpp"

namespace hrm {

// ---------------------------------------------------------------- losses

// Mean over non-pad targets of -log p(y). With `d_logits` the gradient of
// `scale * loss` is written into it (same shape as `logits`).
template <typename T>
double sequence_loss(const Eigen::Ref<const Mat<T>>& logits, std::span<const int> targets,
                     bool use_stablemax, Eigen::Ref<Mat<T>>* d_logits = nullptr,
                     double scale = 1.0) {
  if (static_cast<std::size_t>(logits.rows()) != targets.size()) {
    throw InputError("sequence_loss: logits and targets disagree in length");
  }
  const auto counted = std::count_if(targets.begin(), targets.end(), [](int t) { return t != kPadToken; });
  if (counted == 0) throw InputError("sequence_loss: every target position is padding");
  const double inv = 1.0 / static_cast<double>(counted);
  const Eigen::Index vocab = logits.cols();
  double total = 0.0;
  if (d_logits) d_logits->setZero();
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const int y = targets[static_cast<std::size_t>(i)];
    if (y == kPadToken) continue;
    if (y < 0 || y >= vocab) throw InputError("sequence_loss: target id outside vocabulary");
    const auto row = logits.row(i);
    if (use_stablemax) {
      double sum = 0.0;
      for (Eigen::Index j = 0; j < vocab; ++j) sum += static_cast<double>(stablemax_s(row(j)));
      const double sy = static_cast<double>(stablemax_s(row(y)));
      total += std::log(sum) - std::log(sy);
      if (d_logits) {
        for (Eigen::Index j = 0; j < vocab; ++j) {
          double g = static_cast<double>(stablemax_ds(row(j))) / sum;
          if (j == y) g -= static_cast<double>(stablemax_ds(row(j))) / sy;
          (*d_logits)(i, j) = static_cast<T>(g * inv * scale);
        }
      }
    } else {
      const double mx = static_cast<double>(row.maxCoeff());
      double sum = 0.0;
      for (Eigen::Index j = 0; j < vocab; ++j) sum += std::exp(static_cast<double>(row(j)) - mx);
      const double lse = mx + std::log(sum);
      total += lse - static_cast<double>(row(y));
      if (d_logits) {
        for (Eigen::Index j = 0; j < vocab; ++j) {
          double g = std::exp(static_cast<double>(row(j)) - lse);
          if (j == y) g -= 1.0;
          (*d_logits)(i, j) = static_cast<T>(g * inv * scale);
        }
      }
    }
  }
  return total * inv;
}

// -(g log q + (1 - g) log(1 - q)).
double binary_cross_entropy(double q, double g);
// Same quantity parameterised by the pre-sigmoid logit, computed stably.
double binary_cross_entropy_logit(double logit, double g);

struct QTargets {
  double halt = 0.0;
  double cont = 0.0;
};

// Halt target is the correctness reward; continue target bootstraps from the
// next segment's Q values, using only the halt value on the final segment.
QTargets q_targets(bool correct, double next_q_halt, double next_q_continue, int segment, int max_segments);

bool halt_decision(int segment, double q_halt, double q_continue, int min_segments, int max_segments);

// 1 with probability 1 - eps, otherwise uniform over {2..max_segments}.
int sample_min_segments(double explore_prob, int max_segments, Rng& rng);

// Sequence loss plus the mean binary cross-entropy of the two Q outputs.
template <typename T>
double act_loss(const Mat<T>& logits, std::span<const int> targets, bool use_stablemax,
                double q_halt, double q_continue, const QTargets& g) {
  const double seq = sequence_loss<T>(logits, targets, use_stablemax);
  return seq + 0.5 * (binary_cross_entropy(q_halt, g.halt) + binary_cross_entropy(q_continue, g.cont));
}

// Greedy argmax equals the target at every non-pad position.
template <typename T>
bool exact_match(const Eigen::Ref<const Mat<T>>& logits, std::span<const int> targets) {
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const int y = targets[static_cast<std::size_t>(i)];
    if (y == kPadToken) continue;
    Eigen::Index arg = 0;
    logits.row(i).maxCoeff(&arg);
    if (arg != y) return false;
  }
  return true;
}

template <typename T>
std::vector<int> argmax_tokens(const Eigen::Ref<const Mat<T>>& logits) {
  std::vector<int> out(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index arg = 0;
    logits.row(i).maxCoeff(&arg);
    out[static_cast<std::size_t>(i)] = static_cast<int>(arg);
  }
  return out;
}

// ---------------------------------------------------------------- optimizer

template <typename T>
struct OptimizerState {
  Parameters<T> first_moment;
  Parameters<T> second_moment;
  long step = 0;

  static OptimizerState for_params(const Parameters<T>& p) {
    return {p.zeros_like(), p.zeros_like(), 0};
  }
};

// Linear warmup from 0 to `lr` over warmup_steps, constant afterwards.
// `step` is the 1-based index of the update being applied.
double learning_rate_at(const ModelConfig& cfg, long step);

template <typename T>
bool all_finite(const Parameters<T>& p) {
  bool ok = true;
  p.for_each([&](ParamGroup, const std::string&, const Mat<T>& m) { ok = ok && m.allFinite(); });
  return ok;
}

// Adam-atan2 with decoupled weight decay:
//   w <- w (1 - lr * wd) - lr * atan2(m_hat, sqrt(v_hat)).
// Returns the learning rate used.
template <typename T>
double optimizer_step(Parameters<T>& params, const Parameters<T>& grads, OptimizerState<T>& st,
                      const ModelConfig& cfg) {
  if (!all_finite(grads)) throw NumericalError("non-finite gradient");
  ++st.step;
  const double lr = learning_rate_at(cfg, st.step);
  const T b1 = static_cast<T>(cfg.beta1);
  const T b2 = static_cast<T>(cfg.beta2);
  const T bc1 = static_cast<T>(1.0 - std::pow(cfg.beta1, static_cast<double>(st.step)));
  const T bc2 = static_cast<T>(1.0 - std::pow(cfg.beta2, static_cast<double>(st.step)));
  const T decay = static_cast<T>(1.0 - lr * cfg.weight_decay);
  const T step = static_cast<T>(lr);

  std::vector<const Mat<T>*> g;
  grads.for_each([&](ParamGroup, const std::string&, const Mat<T>& m) { g.push_back(&m); });
  std::vector<Mat<T>*> mom1, mom2;
  st.first_moment.for_each([&](ParamGroup, const std::string&, Mat<T>& m) { mom1.push_back(&m); });
  st.second_moment.for_each([&](ParamGroup, const std::string&, Mat<T>& m) { mom2.push_back(&m); });
  std::size_t k = 0;
  params.for_each([&](ParamGroup, const std::string&, Mat<T>& w) {
    Mat<T>& m1 = *mom1[k];
    Mat<T>& m2 = *mom2[k];
    const Mat<T>& gr = *g[k];
    ++k;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      const T gi = gr.data()[i];
      T& a = m1.data()[i];
      T& b = m2.data()[i];
      a = b1 * a + (T(1) - b1) * gi;
      b = b2 * b + (T(1) - b2) * gi * gi;
      const T update = std::atan2(a / bc1, std::sqrt(b / bc2));
      w.data()[i] = w.data()[i] * decay - step * update;
    }
  });
  return lr;
}

// ---------------------------------------------------------------- supervision

template <typename T>
struct SupervisedSegment {
  SegmentResult<T> forward;
  Parameters<T> grads;
  std::vector<QTargets> targets;
  std::vector<char> correct;
  double loss = 0.0;
  double seq_loss = 0.0;
  double bce = 0.0;
};

// Runs one recorded segment over a batch, forms Q targets from a gradient-free
// lookahead segment, and accumulates gradients of the batch-mean loss.
// `segments` holds each example's 1-based segment index.
template <typename T>
SupervisedSegment<T> supervised_segment(const Model<T>& m, const CarryState<T>& carry,
                                        std::span<const int> tokens, std::span<const int> targets,
                                        std::span<const int> segments) {
  const ModelConfig& cfg = m.config;
  const int S = cfg.seq_len;
  const int batch = static_cast<int>(segments.size());
  SupervisedSegment<T> out;
  out.forward = segment_forward(m, carry, tokens, /*record=*/true);
  const auto& fwd = out.forward;

  std::optional<SegmentResult<T>> ahead;
  if (cfg.act && cfg.max_segments > 1) ahead = segment_forward(m, fwd.carry, tokens, /*record=*/false);

  Mat<T> d_logits(fwd.logits.rows(), fwd.logits.cols());
  Mat<T> d_q(batch, 2);
  out.targets.resize(static_cast<std::size_t>(batch));
  out.correct.resize(static_cast<std::size_t>(batch));
  const double inv_batch = 1.0 / batch;
  for (int b = 0; b < batch; ++b) {
    const auto rows = fwd.logits.middleRows(b * S, S);
    const auto tgt = targets.subspan(static_cast<std::size_t>(b * S), static_cast<std::size_t>(S));
    Eigen::Ref<Mat<T>> d_rows = d_logits.middleRows(b * S, S);
    const double seq = sequence_loss<T>(rows, tgt, cfg.use_stablemax, &d_rows, inv_batch);
    const bool ok = exact_match<T>(rows, tgt);
    QTargets g;
    if (ahead) {
      g = q_targets(ok, ahead->q_halt(b), ahead->q_continue(b), segments[static_cast<std::size_t>(b)], cfg.max_segments);
    } else {
      g = {ok ? 1.0 : 0.0, ok ? 1.0 : 0.0};
    }
    const double lh = static_cast<double>(fwd.q_logits(b, 0));
    const double lc = static_cast<double>(fwd.q_logits(b, 1));
    const double bce = 0.5 * (binary_cross_entropy_logit(lh, g.halt) + binary_cross_entropy_logit(lc, g.cont));
    d_q(b, 0) = static_cast<T>(0.5 * inv_batch * (1.0 / (1.0 + std::exp(-lh)) - g.halt));
    d_q(b, 1) = static_cast<T>(0.5 * inv_batch * (1.0 / (1.0 + std::exp(-lc)) - g.cont));
    out.targets[static_cast<std::size_t>(b)] = g;
    out.correct[static_cast<std::size_t>(b)] = ok;
    out.seq_loss += seq * inv_batch;
    out.bce += bce * inv_batch;
  }
  out.loss = out.seq_loss + out.bce;
  if (!std::isfinite(out.loss)) throw NumericalError("non-finite loss");
  out.grads = m.params.zeros_like();
  segment_backward(m, *fwd.record, d_logits, d_q, out.grads);
  return out;
}

struct TrainMetrics {
  long step = 0;
  double loss = 0.0;
  double seq_loss = 0.0;
  double bce = 0.0;
  double mean_segments = 0.0;
  double lr = 0.0;
  double exact_match = 0.0;
};

nlohmann::ordered_json to_json(const TrainMetrics& m);

struct TrainSlot {
  std::size_t example = 0;
  int segment = 1;
  int min_segments = 1;
};

// Everything needed to continue training bit-exactly.
template <typename T>
struct TrainerState {
  OptimizerState<T> optimizer;
  std::vector<TrainSlot> slots;
  CarryState<T> carry;
  Rng rng;
  std::vector<std::size_t> order;
  std::size_t cursor = 0;
};

template <typename T>
class Trainer {
 public:
  Trainer(Model<T> model, std::vector<TokenExample> data)
      : model_(std::move(model)), data_(std::move(data)) {
    check_data();
    const int batch = model_.config.batch_size;
    state_.optimizer = OptimizerState<T>::for_params(model_.params);
    state_.rng = Rng(derive_seed(model_.config.seed, 2));
    state_.carry = model_.fresh_carry(batch);
    state_.slots.resize(static_cast<std::size_t>(batch));
    for (int b = 0; b < batch; ++b) load_fresh(b);
  }

  Trainer(Model<T> model, std::vector<TokenExample> data, TrainerState<T> state)
      : model_(std::move(model)), data_(std::move(data)), state_(std::move(state)) {
    check_data();
  }

  // One deep-supervision step over the batch: one segment per slot, one
  // optimizer update, then halted slots are refilled.
  TrainMetrics step() {
    const ModelConfig& cfg = model_.config;
    const int S = cfg.seq_len;
    const int batch = static_cast<int>(state_.slots.size());
    std::vector<int> tokens(static_cast<std::size_t>(batch * S));
    std::vector<int> targets(tokens.size());
    std::vector<int> segments(static_cast<std::size_t>(batch));
    for (int b = 0; b < batch; ++b) {
      const auto& slot = state_.slots[static_cast<std::size_t>(b)];
      const TokenExample& ex = data_[slot.example];
      std::copy(ex.input.begin(), ex.input.end(), tokens.begin() + b * S);
      std::copy(ex.target.begin(), ex.target.end(), targets.begin() + b * S);
      segments[static_cast<std::size_t>(b)] = slot.segment;
    }
    auto seg = supervised_segment(model_, state_.carry, tokens, targets, segments);
    TrainMetrics metrics;
    metrics.lr = optimizer_step(model_.params, seg.grads, state_.optimizer, cfg);
    metrics.step = state_.optimizer.step;
    metrics.loss = seg.loss;
    metrics.seq_loss = seg.seq_loss;
    metrics.bce = seg.bce;

    state_.carry = std::move(seg.forward.carry);
    double seg_sum = 0.0;
    double correct = 0.0;
    for (int b = 0; b < batch; ++b) {
      auto& slot = state_.slots[static_cast<std::size_t>(b)];
      seg_sum += slot.segment;
      correct += seg.correct[static_cast<std::size_t>(b)] ? 1.0 : 0.0;
      const bool halt = cfg.act ? halt_decision(slot.segment, seg.forward.q_halt(b), seg.forward.q_continue(b),
                                                slot.min_segments, cfg.max_segments)
                                : slot.segment >= cfg.max_segments;
      if (halt) {
        load_fresh(b);
      } else {
        ++slot.segment;
      }
    }
    metrics.mean_segments = seg_sum / batch;
    metrics.exact_match = correct / batch;
    return metrics;
  }

  const Model<T>& model() const { return model_; }
  Model<T>& model() { return model_; }
  const TrainerState<T>& state() const { return state_; }
  const std::vector<TokenExample>& data() const { return data_; }

 private:
  void check_data() {
    if (data_.empty()) throw InputError("training set is empty");
    for (const auto& ex : data_) {
      if (static_cast<int>(ex.input.size()) != model_.config.seq_len) {
        throw InputError("example length " + std::to_string(ex.input.size()) +
                         " does not match seq_len " + std::to_string(model_.config.seq_len));
      }
    }
  }

  std::size_t next_example() {
    if (state_.cursor >= state_.order.size()) {
      state_.order.resize(data_.size());
      std::iota(state_.order.begin(), state_.order.end(), std::size_t{0});
      state_.rng.shuffle(std::span<std::size_t>(state_.order));
      state_.cursor = 0;
    }
    return state_.order[state_.cursor++];
  }

  void load_fresh(int b) {
    auto& slot = state_.slots[static_cast<std::size_t>(b)];
    slot.example = next_example();
    slot.segment = 1;
    slot.min_segments = sample_min_segments(model_.config.explore_prob, model_.config.max_segments, state_.rng);
    model_.reset_carry_rows(state_.carry, b);
  }

  Model<T> model_;
  std::vector<TokenExample> data_;
  TrainerState<T> state_;
};

// ---------------------------------------------------------------- evaluation

struct ExamplePrediction {
  std::vector<int> tokens;
  int segments = 0;
  bool correct = false;
};

struct EvalReport {
  double exact_match = 0.0;     // fraction in [0, 1]
  double token_accuracy = 0.0;  // over non-pad targets
  double mean_segments = 0.0;
  std::vector<ExamplePrediction> predictions;
};

// Greedy decoding; an example halts at the first segment where
// q_halt > q_continue, or at max_segments. Models trained without adaptive
// halting always run max_segments.
template <typename T>
EvalReport evaluate(const Model<T>& m, std::span<const TokenExample> data, int max_segments,
                    int batch_size = 32) {
  if (max_segments < 1) throw ConfigError("max_segments must be >= 1");
  const int S = m.config.seq_len;
  EvalReport report;
  report.predictions.resize(data.size());
  long token_total = 0;
  long token_right = 0;
  for (std::size_t start = 0; start < data.size(); start += static_cast<std::size_t>(batch_size)) {
    const int batch = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(batch_size), data.size() - start));
    std::vector<int> tokens(static_cast<std::size_t>(batch * S));
    for (int b = 0; b < batch; ++b) {
      const auto& ex = data[start + static_cast<std::size_t>(b)];
      if (static_cast<int>(ex.input.size()) != S) throw InputError("example length does not match seq_len");
      std::copy(ex.input.begin(), ex.input.end(), tokens.begin() + b * S);
    }
    CarryState<T> carry = m.fresh_carry(batch);
    std::vector<char> done(static_cast<std::size_t>(batch), 0);
    int remaining = batch;
    for (int seg = 1; seg <= max_segments && remaining > 0; ++seg) {
      auto fwd = segment_forward(m, carry, tokens, /*record=*/false);
      for (int b = 0; b < batch; ++b) {
        if (done[static_cast<std::size_t>(b)]) continue;
        const bool halt = m.config.act ? halt_decision(seg, fwd.q_halt(b), fwd.q_continue(b), 1, max_segments)
                                       : seg >= max_segments;
        if (!halt) continue;
        done[static_cast<std::size_t>(b)] = 1;
        --remaining;
        const auto& ex = data[start + static_cast<std::size_t>(b)];
        auto& pred = report.predictions[start + static_cast<std::size_t>(b)];
        pred.tokens = argmax_tokens<T>(fwd.logits.middleRows(b * S, S));
        pred.segments = seg;
        pred.correct = true;
        for (int i = 0; i < S; ++i) {
          const int y = ex.target[static_cast<std::size_t>(i)];
          if (y == kPadToken) continue;
          ++token_total;
          if (pred.tokens[static_cast<std::size_t>(i)] == y) {
            ++token_right;
          } else {
            pred.correct = false;
          }
        }
      }
      carry = std::move(fwd.carry);
    }
  }
  double correct = 0.0;
  double segs = 0.0;
  for (const auto& p : report.predictions) {
    correct += p.correct ? 1.0 : 0.0;
    segs += p.segments;
  }
  if (!data.empty()) {
    report.exact_match = correct / static_cast<double>(data.size());
    report.mean_segments = segs / static_cast<double>(data.size());
  }
  report.token_accuracy = token_total > 0 ? static_cast<double>(token_right) / static_cast<double>(token_total) : 0.0;
  return report;
}

}  // namespace hrm
