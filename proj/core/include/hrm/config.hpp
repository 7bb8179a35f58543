#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

namespace hrm {

enum class Arch { kHrm, kFeedforward, kRecurrent };

std::string to_string(Arch arch);
Arch arch_from_string(const std::string& name);

// Architecture and optimizer hyperparameters. Defaults are sized for CPU
// training of the Sudoku toy tasks.
struct ModelConfig {
  Arch arch = Arch::kHrm;
  int vocab_size = 11;
  int seq_len = 81;
  int hidden_dim = 128;
  int n_heads = 4;
  int blocks_per_module = 2;
  double expansion = 4.0;
  int cycles = 2;        // high-level cycles per segment
  int low_steps = 2;     // low-level steps per cycle
  int max_segments = 8;  // M_max
  bool act = true;        // false: every example runs exactly max_segments
  double explore_prob = 0.1;
  bool use_stablemax = false;
  double rms_eps = 1e-6;
  double rope_base = 10000.0;

  // Baselines: feedforward stacks `baseline_depth` blocks; recurrent applies a
  // stack of `baseline_depth` blocks `baseline_loops` times with shared weights.
  int baseline_depth = 4;
  int baseline_loops = 4;

  double lr = 3e-4;
  int warmup_steps = 200;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double weight_decay = 0.1;
  int batch_size = 16;
  std::uint64_t seed = 0;

  int head_dim() const { return hidden_dim / n_heads; }
  int inner_dim() const;
  // Throws ConfigError when an invariant does not hold.
  void validate() const;
};

nlohmann::ordered_json to_json(const ModelConfig& config);
// Unknown keys are rejected; missing keys keep `base` values.
ModelConfig config_from_json(const nlohmann::json& j, const ModelConfig& base = {});

}  // namespace hrm
