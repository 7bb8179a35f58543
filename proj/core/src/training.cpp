#include "hrm/training.hpp"

namespace hrm {

double binary_cross_entropy(double q, double g) {
  constexpr double kTiny = 1e-300;
  return -(g * std::log(std::max(q, kTiny)) + (1.0 - g) * std::log(std::max(1.0 - q, kTiny)));
}

double binary_cross_entropy_logit(double logit, double g) {
  // softplus(l) - g * l
  return std::max(logit, 0.0) - g * logit + std::log1p(std::exp(-std::abs(logit)));
}

QTargets q_targets(bool correct, double next_q_halt, double next_q_continue, int segment, int max_segments) {
  QTargets t;
  t.halt = correct ? 1.0 : 0.0;
  t.cont = segment >= max_segments ? next_q_halt : std::max(next_q_halt, next_q_continue);
  return t;
}

bool halt_decision(int segment, double q_halt, double q_continue, int min_segments, int max_segments) {
  return segment >= max_segments || (q_halt > q_continue && segment >= min_segments);
}

int sample_min_segments(double explore_prob, int max_segments, Rng& rng) {
  const double u = rng.uniform();
  // With a single segment there is nothing to explore.
  if (u < explore_prob && max_segments >= 2) return rng.uniform_int(2, max_segments);
  return 1;
}

double learning_rate_at(const ModelConfig& cfg, long step) {
  if (cfg.warmup_steps <= 0 || step >= cfg.warmup_steps) return cfg.lr;
  return cfg.lr * static_cast<double>(step) / static_cast<double>(cfg.warmup_steps);
}

nlohmann::ordered_json to_json(const TrainMetrics& m) {
  nlohmann::ordered_json j;
  j["step"] = m.step;
  j["loss"] = m.loss;
  j["seq_loss"] = m.seq_loss;
  j["bce"] = m.bce;
  j["mean_segments"] = m.mean_segments;
  j["lr"] = m.lr;
  j["exact_match"] = m.exact_match;
  return j;
}

}  // namespace hrm
