#pragma once

// Diagnostics over hidden-state trajectories: effective dimensionality,
// principal components, forward residuals and step-by-step decoding, plus
// the training sweeps that compare HRM with its baselines.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "hrm/training.hpp"

namespace hrm {

// ---------------------------------------------------------------- dimensionality

// Non-zero spectrum of the sample covariance of `states` (rows are samples),
// sorted descending. Uses the n x n Gram matrix when samples < dimensions.
Eigen::VectorXd covariance_eigenvalues(const Eigen::MatrixXd& states);

// (sum lambda)^2 / sum lambda^2. Throws InputError with fewer than two
// samples or zero variance.
double participation_ratio(const Eigen::MatrixXd& states);

struct PcaResult {
  Eigen::RowVectorXd mean;
  Eigen::MatrixXd components;   // [dim, k], orthonormal columns
  Eigen::VectorXd variances;    // length k, non-increasing
  Eigen::MatrixXd projected;    // [samples, k]
};

// Top-k principal components of the pooled states. Components beyond the
// covariance rank are dropped, so `components` may have fewer than k columns.
PcaResult pca_project(const Eigen::MatrixXd& states, int k);

// ---------------------------------------------------------------- trajectories

// Per-example states from a (possibly multi-segment) trace, one matrix per
// snapshot, each [seq, d].
struct ExampleTrace {
  std::vector<Eigen::MatrixXd> z_low;
  std::vector<Eigen::MatrixXd> z_high;
  int low_steps = 1;  // T, for cycle bookkeeping
};

// Runs `segments` segments on one example from the fixed initial state and
// concatenates the traces (snapshot 0 is the initial state).
template <typename T>
ExampleTrace collect_trace(const Model<T>& m, std::span<const int> tokens, int segments) {
  ExampleTrace out;
  out.low_steps = m.config.arch == Arch::kHrm ? m.config.low_steps : 1;
  CarryState<T> carry = m.fresh_carry(1);
  for (int s = 0; s < segments; ++s) {
    auto fwd = segment_forward(m, carry, tokens, /*record=*/false, /*capture_trace=*/true);
    const auto& tr = *fwd.trace;
    for (std::size_t i = (s == 0 ? 0 : 1); i < tr.size(); ++i) {
      out.z_low.push_back(tr.z_low[i].template cast<double>());
      out.z_high.push_back(tr.z_high[i].template cast<double>());
    }
    carry = std::move(fwd.carry);
  }
  return out;
}

struct ResidualSeries {
  std::vector<double> low;    // r_i for i = 1..steps
  std::vector<double> high;
  std::vector<int> boundaries;  // step index (1-based) of each cycle's first step, cycles >= 2
  std::vector<bool> spikes;     // low residual at that step exceeds the previous step's
  double spike_fraction = 0.0;
};

// r_i = ||z^i - z^{i-1}||_2 / element count.
ResidualSeries residual_series(const ExampleTrace& trace);

struct IntermediateDecode {
  int step = 0;
  std::vector<int> tokens;
  std::vector<int> violations;  // Sudoku only: 1 where a digit clashes with a peer
  std::vector<int> changed;     // 1 where the decode differs from the previous step's
};

// Decodes every step i >= 1 via one extra high-level update from the state
// that fed step i: y_i = argmax head(f_H(z_H^{i-1}, z_L^i)). At a cycle's last
// step this is exactly the model's own high-level update.
template <typename T>
std::vector<IntermediateDecode> intermediate_predictions(const Model<T>& m, std::span<const int> input,
                                                         const ExampleTrace& trace, bool sudoku);

// ---------------------------------------------------------------- scaling

struct PrPoint {
  int trajectories = 0;
  double pr_high = 0.0;
  double pr_low = 0.0;
};

// Samples are flattened per-snapshot states (seq * d) of every step of every
// included trajectory.
Eigen::MatrixXd pool_states(std::span<const ExampleTrace> traces, bool high);

std::vector<PrPoint> pr_scaling_curve(std::span<const ExampleTrace> traces, std::span<const int> counts);

// ---------------------------------------------------------------- sweeps

struct SweepVariant {
  std::string name;
  ModelConfig config;
};

struct SweepRow {
  std::string name;
  std::string arch;
  int hidden_dim = 0;
  int depth = 0;  // blocks per forward (HRM: blocks per module x 2)
  std::size_t parameters = 0;
  long steps = 0;
  double train_exact = 0.0;
  double test_exact = 0.0;
  double test_token_accuracy = 0.0;
  double mean_segments = 0.0;
  std::string error;
};

nlohmann::ordered_json to_json(const SweepRow& row);

// Trains each variant for `steps` optimizer steps and evaluates at its own
// max_segments. Failures are recorded in the row and the sweep continues.
std::vector<SweepRow> depth_width_sweep(std::span<const SweepVariant> variants,
                                        const std::vector<TokenExample>& train,
                                        const std::vector<TokenExample>& test, long steps);

struct ActRow {
  std::string model;  // "act" or "fixed"
  int train_max_segments = 0;
  int eval_max_segments = 0;
  double mean_segments = 0.0;
  double exact = 0.0;
  double token_accuracy = 0.0;
};

nlohmann::ordered_json to_json(const ActRow& row);

// Trains an adaptive-halting model and a fixed-segment model from `base`
// (max_segments = train_max), then evaluates both at every entry of
// eval_limits (which may exceed train_max).
std::vector<ActRow> act_comparison(const ModelConfig& base, int train_max, std::span<const int> eval_limits,
                                   const std::vector<TokenExample>& train,
                                   const std::vector<TokenExample>& test, long steps);

}  // namespace hrm
