#pragma once

// Subcommand implementations behind the `hrm` binary. Each command reads a
// fully resolved RunConfig and writes its outputs under `out` atomically.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hrm/config.hpp"

namespace hrm {

struct RunConfig {
  ModelConfig model;
  std::uint64_t seed = 0;
  std::filesystem::path out = ".";

  // gen
  std::string task = "sudoku";  // sudoku | maze | arc
  long count = 100;
  std::optional<double> split;  // train fraction; absent writes one file
  int augment = 0;              // extra augmented copies per training example
  long min_difficulty = 0;      // Sudoku backtrack band
  long max_difficulty = 0;
  std::filesystem::path arc_dir;

  // train / eval / analyze / sweep
  std::filesystem::path data;
  std::filesystem::path test_data;
  std::filesystem::path checkpoint;
  std::filesystem::path resume;
  long steps = 1000;
  long checkpoint_every = 500;
  int max_segments_eval = 0;  // 0: the model's max_segments
  int n_augment = 8;

  std::string mode;        // analyze: pr | residuals | pca | intermediate | pr-scaling
  int samples = 50;        // inputs traced by analyze
  int trace_segments = 1;  // segments per traced input
  int pca_k = 2;
  std::vector<int> trajectory_counts;

  std::string sweep = "depth-width";  // depth-width | act
  nlohmann::json variants = nlohmann::json::array();  // [{name, model}]
  std::vector<int> eval_limits;
};

// Keys mirror the struct fields, with ModelConfig under "model". Unknown keys
// throw ConfigError.
RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = {});
RunConfig load_run_config(const std::filesystem::path& path);

// Each returns normally on success and throws InputError / NumericalError /
// GenerationError otherwise.
void run_gen(const RunConfig& cfg);
void run_train(const RunConfig& cfg);
void run_eval(const RunConfig& cfg);
void run_arc_eval(const RunConfig& cfg);
void run_analyze(const RunConfig& cfg);
void run_sweep(const RunConfig& cfg);

// Plot-data record {series, x, y}.
nlohmann::ordered_json plot_point(const std::string& series, const nlohmann::ordered_json& x,
                                  const nlohmann::ordered_json& y);

}  // namespace hrm
