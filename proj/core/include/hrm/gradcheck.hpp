#pragma once

// Finite-difference check of the one-step gradient. The reference loss holds
// every no-grad step fixed at its unperturbed value and re-runs only the
// recorded low- and high-level updates, the head and the Q-head, so both
// sides differentiate the same function.

#include <map>
#include <string>

#include "hrm/training.hpp"

namespace hrm {

struct GradCheckReport {
  // Per group: max_i |analytic_i - numeric_i| / max_i |numeric_i|.
  std::map<std::string, double> group_error;
  std::map<std::string, double> numeric_norm;
  std::map<std::string, double> analytic_norm;
  double worst = 0.0;
};

namespace detail {

// Loss of one segment given the frozen state that enters the recorded steps.
inline double frozen_segment_loss(const Model<double>& m, const Mat<double>& zl_in, const Mat<double>& zh_in,
                                  std::span<const int> tokens, std::span<const int> targets,
                                  const std::vector<QTargets>& g) {
  const ModelConfig& cfg = m.config;
  const Mat<double> x = embed_input<double>(tokens, m.params.embed);
  Mat<double> z;
  if (cfg.arch == Arch::kHrm) {
    const Mat<double> zl = l_step(zl_in, zh_in, x, m);
    z = h_step(zh_in, zl, m);
  } else if (cfg.arch == Arch::kFeedforward) {
    z = stack_forward(x, m.params.low, m.shape());
  } else {
    z = module_forward<double>({&zh_in, &x}, m.params.low, m.shape());
  }
  const Mat<double> logits = output_head(z, m.params.head);
  const Mat<double> ql = q_logits(z, m.params.q_head, cfg.seq_len);
  const int S = cfg.seq_len;
  const int batch = static_cast<int>(g.size());
  double loss = 0.0;
  for (int b = 0; b < batch; ++b) {
    loss += sequence_loss<double>(logits.middleRows(b * S, S),
                                  targets.subspan(static_cast<std::size_t>(b * S), static_cast<std::size_t>(S)),
                                  cfg.use_stablemax);
    loss += 0.5 * (binary_cross_entropy_logit(ql(b, 0), g[static_cast<std::size_t>(b)].halt) +
                   binary_cross_entropy_logit(ql(b, 1), g[static_cast<std::size_t>(b)].cont));
  }
  return loss / batch;
}

}  // namespace detail

// Analytic gradients from supervised_segment against central differences with
// step `h`. Q targets are taken from the analytic pass and held fixed.
inline GradCheckReport one_step_gradient_check(const Model<double>& model, const CarryState<double>& carry,
                                               std::span<const int> tokens, std::span<const int> targets,
                                               std::span<const int> segments, double h = 1e-5) {
  const ModelConfig& cfg = model.config;
  const auto sup = supervised_segment(model, carry, tokens, targets, segments);

  // State entering the recorded updates.
  Mat<double> zl_in = carry.z_low;
  Mat<double> zh_in = carry.z_high;
  if (cfg.arch == Arch::kHrm) {
    const auto traced = segment_forward(model, carry, tokens, /*record=*/false, /*capture_trace=*/true);
    const std::size_t k = traced.trace->size() - 2;
    zl_in = traced.trace->z_low[k];
    zh_in = traced.trace->z_high[k];
  } else if (cfg.arch == Arch::kRecurrent) {
    const Mat<double> x = embed_input<double>(tokens, model.params.embed);
    zh_in = carry.z_high;
    for (int i = 0; i + 1 < cfg.baseline_loops; ++i) zh_in = module_forward<double>({&zh_in, &x}, model.params.low, model.shape());
  }
  if (!std::isfinite(detail::frozen_segment_loss(model, zl_in, zh_in, tokens, targets, sup.targets))) {
    throw NumericalError("non-finite loss in gradient check");
  }

  Model<double> probe = model;
  std::vector<Mat<double>*> live;
  probe.params.for_each([&](ParamGroup, const std::string&, Mat<double>& w) { live.push_back(&w); });
  std::vector<const Mat<double>*> analytic;
  sup.grads.for_each([&](ParamGroup, const std::string&, const Mat<double>& w) { analytic.push_back(&w); });
  std::vector<ParamGroup> groups;
  model.params.for_each([&](ParamGroup g, const std::string&, const Mat<double>&) { groups.push_back(g); });

  std::map<std::string, double> max_diff, max_num, max_ana;
  for (std::size_t k = 0; k < live.size(); ++k) {
    const std::string name = to_string(groups[k]);
    Mat<double>& w = *live[k];
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      const double orig = w.data()[i];
      w.data()[i] = orig + h;
      const double up = detail::frozen_segment_loss(probe, zl_in, zh_in, tokens, targets, sup.targets);
      w.data()[i] = orig - h;
      const double down = detail::frozen_segment_loss(probe, zl_in, zh_in, tokens, targets, sup.targets);
      w.data()[i] = orig;
      const double num = (up - down) / (2.0 * h);
      const double ana = analytic[k]->data()[i];
      max_diff[name] = std::max(max_diff[name], std::abs(ana - num));
      max_num[name] = std::max(max_num[name], std::abs(num));
      max_ana[name] = std::max(max_ana[name], std::abs(ana));
    }
  }
  GradCheckReport r;
  for (const auto& [name, diff] : max_diff) {
    const double scale = std::max(max_num[name], 1e-12);
    r.group_error[name] = diff / scale;
    r.numeric_norm[name] = max_num[name];
    r.analytic_norm[name] = max_ana[name];
    r.worst = std::max(r.worst, r.group_error[name]);
  }
  return r;
}

}  // namespace hrm
