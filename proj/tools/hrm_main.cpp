// hrm: dataset generation, training, evaluation and analysis front end.

#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "hrm/commands.hpp"
#include "hrm/errors.hpp"
#include "hrm/runtime.hpp"

namespace {

enum ExitCode { kOk = 0, kInputError = 1, kNumericalAbort = 2 };

// Flag values are staged here and only copied over the config-file values
// when the flag was actually given.
struct Flags {
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
  std::string task, arc_dir, data, test_data, checkpoint, resume, mode, sweep;
  long count = 0, min_difficulty = 0, max_difficulty = 0, steps = 0, checkpoint_every = 0;
  int augment = 0, max_segments = 0, n_augment = 0, samples = 0, trace_segments = 0;
  double split = 0.0;
};

bool given(CLI::App* sub, const std::string& flag) {
  const CLI::Option* o = sub->get_option_no_throw(flag);
  return o != nullptr && o->count() > 0;
}

template <typename V, typename D>
void apply(CLI::App* sub, const std::string& flag, const V& value, D& dst) {
  if (given(sub, flag)) dst = value;
}

}  // namespace

int main(int argc, char** argv) {
  hrm::tune_allocator();
  CLI::App app{"Hierarchical reasoning model toolkit"};
  app.require_subcommand(1);
  Flags f;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config, "JSON run config")->check(CLI::ExistingFile);
    sub->add_option("--seed", f.seed, "Run seed");
    sub->add_option("--out", f.out, "Output directory");
  };
  auto opt = [&](CLI::App* sub, const std::string& flag, auto& dst, const std::string& help) {
    sub->add_option(flag, dst, help);
  };

  auto* gen = app.add_subcommand("gen", "Generate a dataset");
  common(gen);
  opt(gen, "--task", f.task, "sudoku | maze | arc");
  opt(gen, "--count", f.count, "Number of puzzles");
  opt(gen, "--split", f.split, "Train fraction; writes train.jsonl and test.jsonl");
  opt(gen, "--augment", f.augment, "Augmented copies per training example");
  opt(gen, "--min-difficulty", f.min_difficulty, "Minimum Sudoku backtracks");
  opt(gen, "--max-difficulty", f.max_difficulty, "Maximum Sudoku backtracks");
  opt(gen, "--arc-dir", f.arc_dir, "Directory of ARC task files");

  auto* train = app.add_subcommand("train", "Train with deep supervision");
  common(train);
  opt(train, "--data", f.data, "Training dataset (JSONL)");
  opt(train, "--steps", f.steps, "Total optimizer steps");
  opt(train, "--checkpoint-every", f.checkpoint_every, "Checkpoint interval in steps");
  opt(train, "--resume", f.resume, "Checkpoint to continue from");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  common(eval);
  opt(eval, "--checkpoint", f.checkpoint, "Checkpoint file");
  opt(eval, "--data", f.data, "Evaluation dataset (JSONL)");
  opt(eval, "--max-segments", f.max_segments, "Segment limit at inference");

  auto* arc = app.add_subcommand("arc-eval", "Augment-and-vote ARC evaluation");
  common(arc);
  opt(arc, "--checkpoint", f.checkpoint, "Checkpoint file");
  opt(arc, "--arc-dir", f.arc_dir, "Directory of ARC task files");
  opt(arc, "--n-augment", f.n_augment, "Augmented solves per test input");
  opt(arc, "--max-segments", f.max_segments, "Segment limit at inference");

  auto* analyze = app.add_subcommand("analyze", "Hidden-state diagnostics");
  common(analyze);
  opt(analyze, "--checkpoint", f.checkpoint, "Checkpoint file");
  opt(analyze, "--mode", f.mode, "pr | residuals | pca | intermediate | pr-scaling");
  opt(analyze, "--data", f.data, "Inputs to trace (JSONL)");
  opt(analyze, "--samples", f.samples, "Number of inputs traced");
  opt(analyze, "--segments", f.trace_segments, "Segments per traced input");

  auto* sweep = app.add_subcommand("sweep", "Train and compare model variants");
  common(sweep);
  opt(sweep, "--kind", f.sweep, "depth-width | act");
  opt(sweep, "--data", f.data, "Training dataset (JSONL)");
  opt(sweep, "--test-data", f.test_data, "Test dataset (JSONL)");
  opt(sweep, "--steps", f.steps, "Optimizer steps per variant");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kInputError;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    hrm::RunConfig cfg;
    if (!f.config.empty()) cfg = hrm::load_run_config(f.config);
    apply(sub, "--seed", f.seed, cfg.seed);
    apply(sub, "--out", f.out, cfg.out);
    apply(sub, "--task", f.task, cfg.task);
    apply(sub, "--count", f.count, cfg.count);
    apply(sub, "--split", f.split, cfg.split);
    apply(sub, "--augment", f.augment, cfg.augment);
    apply(sub, "--min-difficulty", f.min_difficulty, cfg.min_difficulty);
    apply(sub, "--max-difficulty", f.max_difficulty, cfg.max_difficulty);
    apply(sub, "--arc-dir", f.arc_dir, cfg.arc_dir);
    apply(sub, "--data", f.data, cfg.data);
    apply(sub, "--test-data", f.test_data, cfg.test_data);
    apply(sub, "--checkpoint", f.checkpoint, cfg.checkpoint);
    apply(sub, "--resume", f.resume, cfg.resume);
    apply(sub, "--steps", f.steps, cfg.steps);
    apply(sub, "--checkpoint-every", f.checkpoint_every, cfg.checkpoint_every);
    apply(sub, "--max-segments", f.max_segments, cfg.max_segments_eval);
    apply(sub, "--n-augment", f.n_augment, cfg.n_augment);
    apply(sub, "--mode", f.mode, cfg.mode);
    apply(sub, "--samples", f.samples, cfg.samples);
    apply(sub, "--segments", f.trace_segments, cfg.trace_segments);
    apply(sub, "--kind", f.sweep, cfg.sweep);
    cfg.model.seed = cfg.seed;
    for (auto* p : {&cfg.out, &cfg.arc_dir, &cfg.data, &cfg.test_data, &cfg.checkpoint, &cfg.resume}) {
      if (!p->empty()) *p = std::filesystem::absolute(*p);
    }

    if (gen->parsed()) hrm::run_gen(cfg);
    if (train->parsed()) hrm::run_train(cfg);
    if (eval->parsed()) hrm::run_eval(cfg);
    if (arc->parsed()) hrm::run_arc_eval(cfg);
    if (analyze->parsed()) hrm::run_analyze(cfg);
    if (sweep->parsed()) hrm::run_sweep(cfg);
  } catch (const hrm::NumericalError& e) {
    std::cerr << "hrm: numerical abort: " << e.what() << "\n";
    return kNumericalAbort;
  } catch (const hrm::GenerationError& e) {
    std::cerr << "hrm: generation failed: " << e.what() << "\n";
    return kInputError;
  } catch (const hrm::InputError& e) {
    std::cerr << "hrm: " << e.what() << "\n";
    return kInputError;
  } catch (const std::exception& e) {
    std::cerr << "hrm: " << e.what() << "\n";
    return kInputError;
  }
  return kOk;
}
