#include "hrm/analysis.hpp"

#include <algorithm>
#include <cmath>

#include "hrm/errors.hpp"
#include "hrm/sudoku.hpp"

namespace hrm {

Eigen::VectorXd covariance_eigenvalues(const Eigen::MatrixXd& states) {
  const Eigen::Index n = states.rows();
  if (n < 2) throw InputError("covariance needs at least two samples");
  const Eigen::MatrixXd centered = states.rowwise() - states.colwise().mean();
  Eigen::MatrixXd cov;
  if (n <= states.cols()) {
    cov = (centered * centered.transpose()) / static_cast<double>(n - 1);
  } else {
    cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov, Eigen::EigenvaluesOnly);
  Eigen::VectorXd ev = solver.eigenvalues().cwiseMax(0.0);
  std::sort(ev.data(), ev.data() + ev.size(), std::greater<>());
  return ev;
}

double participation_ratio(const Eigen::MatrixXd& states) {
  const Eigen::VectorXd ev = covariance_eigenvalues(states);
  const double sum = ev.sum();
  const double sq = ev.squaredNorm();
  if (!(sum > 0.0) || !(sq > 0.0)) throw InputError("participation ratio undefined for zero variance");
  return sum * sum / sq;
}

PcaResult pca_project(const Eigen::MatrixXd& states, int k) {
  const Eigen::Index n = states.rows();
  if (k < 1 || k > states.cols()) throw InputError("pca_project: k must lie in [1, dim]");
  if (n < k + 1) throw InputError("pca_project: need at least k + 1 samples");
  PcaResult r;
  r.mean = states.colwise().mean();
  const Eigen::MatrixXd centered = states.rowwise() - r.mean;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double top = sv.size() > 0 ? sv(0) : 0.0;
  Eigen::Index keep = 0;
  while (keep < k && keep < sv.size() && sv(keep) > 1e-10 * std::max(top, 1e-300)) ++keep;
  r.components = svd.matrixV().leftCols(keep);
  r.variances = sv.head(keep).array().square() / static_cast<double>(n - 1);
  r.projected = centered * r.components;
  return r;
}

ResidualSeries residual_series(const ExampleTrace& trace) {
  if (trace.z_low.size() < 2) throw InputError("residual_series needs a captured trace");
  ResidualSeries r;
  const std::size_t steps = trace.z_low.size() - 1;
  for (std::size_t i = 1; i <= steps; ++i) {
    const double count = static_cast<double>(trace.z_low[i].size());
    r.low.push_back((trace.z_low[i] - trace.z_low[i - 1]).norm() / count);
    r.high.push_back((trace.z_high[i] - trace.z_high[i - 1]).norm() / count);
  }
  const int t = std::max(1, trace.low_steps);
  int spikes = 0;
  for (int first = t + 1; first <= static_cast<int>(steps); first += t) {
    // r.low is 0-based over steps 1..N, so step s lives at s - 1.
    const bool spike = r.low[static_cast<std::size_t>(first - 1)] > r.low[static_cast<std::size_t>(first - 2)];
    r.boundaries.push_back(first);
    r.spikes.push_back(spike);
    spikes += spike ? 1 : 0;
  }
  if (!r.boundaries.empty()) r.spike_fraction = static_cast<double>(spikes) / static_cast<double>(r.boundaries.size());
  return r;
}

template <typename T>
std::vector<IntermediateDecode> intermediate_predictions(const Model<T>& m, std::span<const int> input,
                                                         const ExampleTrace& trace, bool sudoku) {
  std::vector<IntermediateDecode> out;
  std::vector<int> previous(input.begin(), input.end());
  for (std::size_t i = 1; i < trace.z_low.size(); ++i) {
    const Mat<T> zl = trace.z_low[i].template cast<T>();
    const Mat<T> zh_prev = trace.z_high[i - 1].template cast<T>();
    Mat<T> z;
    if (m.config.arch == Arch::kHrm) {
      z = h_step(zh_prev, zl, m);
    } else {
      z = trace.z_high[i].template cast<T>();
    }
    IntermediateDecode d;
    d.step = static_cast<int>(i);
    d.tokens = argmax_tokens<T>(output_head(z, m.params.head));
    d.changed.resize(d.tokens.size());
    for (std::size_t k = 0; k < d.tokens.size(); ++k) d.changed[k] = d.tokens[k] != previous[k] ? 1 : 0;
    if (sudoku) {
      const auto mask = sudoku_violations(detokenize_sudoku(d.tokens));
      d.violations.assign(mask.begin(), mask.end());
    }
    previous = d.tokens;
    out.push_back(std::move(d));
  }
  return out;
}

template std::vector<IntermediateDecode> intermediate_predictions(const Model<float>&, std::span<const int>,
                                                                  const ExampleTrace&, bool);
template std::vector<IntermediateDecode> intermediate_predictions(const Model<double>&, std::span<const int>,
                                                                  const ExampleTrace&, bool);

Eigen::MatrixXd pool_states(std::span<const ExampleTrace> traces, bool high) {
  Eigen::Index rows = 0;
  Eigen::Index dim = 0;
  for (const auto& t : traces) {
    const auto& states = high ? t.z_high : t.z_low;
    rows += static_cast<Eigen::Index>(states.size());
    if (!states.empty()) dim = states.front().size();
  }
  Eigen::MatrixXd pooled(rows, dim);
  Eigen::Index r = 0;
  for (const auto& t : traces) {
    for (const auto& s : high ? t.z_high : t.z_low) {
      pooled.row(r++) = Eigen::Map<const Eigen::RowVectorXd>(s.data(), s.size());
    }
  }
  return pooled;
}

std::vector<PrPoint> pr_scaling_curve(std::span<const ExampleTrace> traces, std::span<const int> counts) {
  std::vector<PrPoint> out;
  for (int c : counts) {
    if (c < 1 || static_cast<std::size_t>(c) > traces.size()) throw InputError("trajectory count out of range");
    const auto subset = traces.first(static_cast<std::size_t>(c));
    PrPoint p;
    p.trajectories = c;
    p.pr_high = participation_ratio(pool_states(subset, true));
    p.pr_low = participation_ratio(pool_states(subset, false));
    out.push_back(p);
  }
  return out;
}

nlohmann::ordered_json to_json(const SweepRow& row) {
  nlohmann::ordered_json j;
  j["name"] = row.name;
  j["arch"] = row.arch;
  j["hidden_dim"] = row.hidden_dim;
  j["depth"] = row.depth;
  j["parameters"] = row.parameters;
  j["steps"] = row.steps;
  j["train_exact"] = row.train_exact;
  j["test_exact"] = row.test_exact;
  j["test_token_accuracy"] = row.test_token_accuracy;
  j["mean_segments"] = row.mean_segments;
  j["error"] = row.error.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(row.error);
  return j;
}

namespace {

Model<float> train_model(const ModelConfig& cfg, const std::vector<TokenExample>& train, long steps) {
  Trainer<float> trainer(Model<float>::create(cfg), train);
  for (long s = 0; s < steps; ++s) trainer.step();
  return trainer.model();
}

std::vector<TokenExample> head_of(const std::vector<TokenExample>& v, std::size_t n) {
  return {v.begin(), v.begin() + static_cast<std::ptrdiff_t>(std::min(n, v.size()))};
}

}  // namespace

std::vector<SweepRow> depth_width_sweep(std::span<const SweepVariant> variants,
                                        const std::vector<TokenExample>& train,
                                        const std::vector<TokenExample>& test, long steps) {
  std::vector<SweepRow> rows;
  const auto train_probe = head_of(train, 512);
  for (const auto& v : variants) {
    SweepRow row;
    row.name = v.name;
    row.arch = to_string(v.config.arch);
    row.hidden_dim = v.config.hidden_dim;
    row.depth = v.config.arch == Arch::kHrm ? 2 * v.config.blocks_per_module : v.config.baseline_depth;
    row.steps = steps;
    try {
      const Model<float> model = train_model(v.config, train, steps);
      row.parameters = model.params.count();
      const auto tr = evaluate(model, train_probe, v.config.max_segments);
      const auto te = evaluate(model, test, v.config.max_segments);
      row.train_exact = tr.exact_match;
      row.test_exact = te.exact_match;
      row.test_token_accuracy = te.token_accuracy;
      row.mean_segments = te.mean_segments;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

nlohmann::ordered_json to_json(const ActRow& row) {
  nlohmann::ordered_json j;
  j["model"] = row.model;
  j["train_max_segments"] = row.train_max_segments;
  j["eval_max_segments"] = row.eval_max_segments;
  j["mean_segments"] = row.mean_segments;
  j["exact"] = row.exact;
  j["token_accuracy"] = row.token_accuracy;
  return j;
}

std::vector<ActRow> act_comparison(const ModelConfig& base, int train_max, std::span<const int> eval_limits,
                                   const std::vector<TokenExample>& train,
                                   const std::vector<TokenExample>& test, long steps) {
  std::vector<ActRow> rows;
  for (const bool adaptive : {true, false}) {
    ModelConfig cfg = base;
    cfg.max_segments = train_max;
    cfg.act = adaptive;
    if (!adaptive || train_max < 2) cfg.explore_prob = 0.0;
    const Model<float> model = train_model(cfg, train, steps);
    for (int limit : eval_limits) {
      const auto r = evaluate(model, test, limit);
      ActRow row;
      row.model = adaptive ? "act" : "fixed";
      row.train_max_segments = train_max;
      row.eval_max_segments = limit;
      row.mean_segments = r.mean_segments;
      row.exact = r.exact_match;
      row.token_accuracy = r.token_accuracy;
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace hrm
