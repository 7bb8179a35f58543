#include "hrm/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "hrm/analysis.hpp"
#include "hrm/arc.hpp"
#include "hrm/checkpoint.hpp"
#include "hrm/dataset.hpp"
#include "hrm/errors.hpp"
#include "hrm/maze.hpp"
#include "hrm/runtime.hpp"
#include "hrm/sudoku.hpp"
#include "hrm/tokenizer.hpp"

namespace hrm {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

// ---------------------------------------------------------------- config

namespace {

template <typename V>
void read_key(const nlohmann::json& j, const char* key, V& dst) {
  if (!j.contains(key)) return;
  try {
    dst = j.at(key).get<V>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

void read_path(const nlohmann::json& j, const char* key, fs::path& dst) {
  std::string s;
  read_key(j, key, s);
  if (j.contains(key)) dst = s;
}

}  // namespace

RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base) {
  static const std::set<std::string> kKeys = {
      "model", "seed", "out", "task", "count", "split", "augment", "min_difficulty", "max_difficulty",
      "arc_dir", "data", "test_data", "checkpoint", "resume", "steps", "checkpoint_every",
      "max_segments_eval", "n_augment", "mode", "samples", "trace_segments", "pca_k", "trajectory_counts",
      "sweep", "variants", "eval_limits"};
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    if (!kKeys.count(k)) throw ConfigError("unknown config key '" + k + "'");
  }
  RunConfig c = std::move(base);
  if (j.contains("model")) c.model = config_from_json(j.at("model"), c.model);
  read_key(j, "seed", c.seed);
  read_path(j, "out", c.out);
  read_key(j, "task", c.task);
  read_key(j, "count", c.count);
  if (j.contains("split")) {
    if (j.at("split").is_null()) {
      c.split.reset();
    } else {
      double s = 0.0;
      read_key(j, "split", s);
      c.split = s;
    }
  }
  read_key(j, "augment", c.augment);
  read_key(j, "min_difficulty", c.min_difficulty);
  read_key(j, "max_difficulty", c.max_difficulty);
  read_path(j, "arc_dir", c.arc_dir);
  read_path(j, "data", c.data);
  read_path(j, "test_data", c.test_data);
  read_path(j, "checkpoint", c.checkpoint);
  read_path(j, "resume", c.resume);
  read_key(j, "steps", c.steps);
  read_key(j, "checkpoint_every", c.checkpoint_every);
  read_key(j, "max_segments_eval", c.max_segments_eval);
  read_key(j, "n_augment", c.n_augment);
  read_key(j, "mode", c.mode);
  read_key(j, "samples", c.samples);
  read_key(j, "trace_segments", c.trace_segments);
  read_key(j, "pca_k", c.pca_k);
  read_key(j, "trajectory_counts", c.trajectory_counts);
  read_key(j, "sweep", c.sweep);
  if (j.contains("variants")) c.variants = j.at("variants");
  read_key(j, "eval_limits", c.eval_limits);
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed config " + path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

ojson plot_point(const std::string& series, const ojson& x, const ojson& y) {
  ojson j;
  j["series"] = series;
  j["x"] = x;
  j["y"] = y;
  return j;
}

// ---------------------------------------------------------------- helpers

namespace {

void require_file(const fs::path& p, const char* what) {
  if (p.empty()) throw InputError(std::string("missing ") + what);
  if (!fs::is_regular_file(p)) throw InputError(std::string(what) + " not found: " + p.string());
}

std::string join_lines(const std::vector<ojson>& records) {
  std::string s;
  for (const auto& r : records) {
    s += r.dump();
    s += '\n';
  }
  return s;
}

// Runs fn(i) for i in [0, n) across worker threads. Results land in
// caller-owned slots, so output order never depends on scheduling.
template <typename F>
void parallel_for(std::size_t n, F&& fn) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(worker_threads()), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!error) error = std::current_exception();
          next.store(n);
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::vector<TokenExample> load_examples(const fs::path& p, const char* what) {
  require_file(p, what);
  return read_dataset(p).examples;
}

// Sequence length always follows the data; the vocabulary grows to cover it.
ModelConfig fit_to_data(ModelConfig cfg, const std::vector<TokenExample>& data) {
  if (data.empty()) throw InputError("dataset has no examples");
  cfg.seq_len = static_cast<int>(data.front().input.size());
  int top = 0;
  for (const auto& ex : data) {
    for (int t : ex.input) top = std::max(top, t);
    for (int t : ex.target) top = std::max(top, t);
  }
  cfg.vocab_size = std::max(cfg.vocab_size, top + 1);
  return cfg;
}

std::uint64_t instance_seed(std::uint64_t seed, std::size_t i) {
  return derive_seed(seed, (std::uint64_t{1} << 32) + i);
}

ojson grid_json(const Grid& g) {
  ojson rows = ojson::array();
  for (int r = 0; r < g.rows; ++r) {
    ojson row = ojson::array();
    for (int c = 0; c < g.cols; ++c) row.push_back(g.at(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---------------------------------------------------------------- gen

struct Generated {
  std::vector<TokenExample> examples;
  std::vector<std::string> keys;
};

Generated generate_sudoku(const RunConfig& cfg) {
  const std::size_t n = static_cast<std::size_t>(cfg.count);
  std::vector<std::optional<SudokuPuzzle>> out(n);
  std::atomic<std::size_t> produced{0};
  const DifficultyBand band{cfg.min_difficulty, cfg.max_difficulty};
  try {
    parallel_for(n, [&](std::size_t i) {
      Rng rng(instance_seed(cfg.seed, i));
      out[i] = sudoku_generate(band, rng);
      ++produced;
    });
  } catch (const GenerationError& e) {
    throw GenerationError(std::string(e.what()) + " (produced " + std::to_string(produced.load()) + " of " +
                              std::to_string(n) + ")",
                          produced.load());
  }
  Generated g;
  for (std::size_t i = 0; i < n; ++i) {
    g.examples.push_back(tokenize(*out[i]));
    g.keys.push_back(sudoku_canonical_key(*out[i]));
  }
  return g;
}

Generated generate_maze(const RunConfig& cfg) {
  const std::size_t n = static_cast<std::size_t>(cfg.count);
  std::vector<std::optional<MazeInstance>> out(n);
  std::atomic<std::size_t> produced{0};
  try {
    parallel_for(n, [&](std::size_t i) {
      Rng rng(instance_seed(cfg.seed, i));
      out[i] = maze_generate(rng);
      ++produced;
    });
  } catch (const GenerationError& e) {
    throw GenerationError(std::string(e.what()) + " (produced " + std::to_string(produced.load()) + " of " +
                              std::to_string(n) + ")",
                          produced.load());
  }
  Generated g;
  for (std::size_t i = 0; i < n; ++i) {
    g.examples.push_back(tokenize(*out[i]));
    std::string key(g.examples.back().input.begin(), g.examples.back().input.end());
    g.keys.push_back(std::move(key));
  }
  return g;
}

// Augmented copies of Sudoku training puzzles are drawn from a stream
// separate from generation so enabling augmentation leaves the base set alone.
void augment_sudoku(std::vector<TokenExample>& train, int copies, std::uint64_t seed) {
  if (copies <= 0) return;
  const std::size_t base = train.size();
  for (std::size_t i = 0; i < base; ++i) {
    Rng rng(derive_seed(seed, (std::uint64_t{2} << 32) + i));
    SudokuPuzzle p;
    p.givens = detokenize_sudoku(train[i].input);
    p.solution = detokenize_sudoku(train[i].target);
    p.difficulty = static_cast<long>(train[i].difficulty.value_or(0.0));
    for (int c = 0; c < copies; ++c) train.push_back(tokenize(sudoku_augment(p, rng)));
  }
}

ArcTransform fitting_transform(const std::vector<const Grid*>& grids, Rng& rng) {
  for (int attempt = 0; attempt < 64; ++attempt) {
    ArcTransform t = ArcTransform::random(rng);
    bool ok = true;
    for (const Grid* g : grids) {
      const int side = std::max(g->rows, g->cols);
      if (side + std::max(t.shift_rows, t.shift_cols) > kArcMaxSide) ok = false;
    }
    if (ok) return t;
  }
  return ArcTransform::identity();
}

void gen_arc(const RunConfig& cfg, ojson provenance) {
  const auto tasks = load_arc_dir(cfg.arc_dir);
  if (tasks.empty()) throw InputError("no ARC task files in " + cfg.arc_dir.string());
  Dataset train;
  Dataset test;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const int id = static_cast<int>(i);
    Rng rng(instance_seed(cfg.seed, i));
    for (const auto& [in, out] : tasks[i].train) {
      ArcExample ex{in, out, id, ArcRole::kDemonstration};
      train.examples.push_back(tokenize(ex));
      for (int c = 0; c < cfg.augment; ++c) {
        const ArcTransform t = fitting_transform({&in, &out}, rng);
        train.examples.push_back(tokenize(arc_augment(ex, t)));
      }
    }
    for (const auto& [in, label] : tasks[i].test) {
      if (!label) continue;
      test.examples.push_back(tokenize(ArcExample{in, *label, id, ArcRole::kTest}));
    }
  }
  provenance["vocab_size"] = arc_vocab_size(static_cast<int>(tasks.size()));
  ojson names = ojson::array();
  for (const auto& t : tasks) names.push_back(t.name);
  provenance["puzzles"] = names;
  train.provenance = provenance;
  train.provenance["split"] = "train";
  test.provenance = provenance;
  test.provenance["split"] = "test";
  write_dataset(cfg.out / "train.jsonl", train);
  write_dataset(cfg.out / "test.jsonl", test);
}

}  // namespace

void run_gen(const RunConfig& cfg) {
  if (cfg.count < 0) throw InputError("--count must be >= 0");
  if (cfg.augment < 0) throw InputError("--augment must be >= 0");
  ojson prov;
  prov["source"] = "hrm gen";
  prov["task"] = cfg.task;
  prov["seed"] = cfg.seed;
  ojson filters;
  if (cfg.task == "sudoku") {
    filters["min_backtracks"] = cfg.min_difficulty;
    filters["max_backtracks"] = cfg.max_difficulty;
    filters["unique_solution"] = true;
  } else if (cfg.task == "maze") {
    filters["side"] = MazeGenOptions{}.size;
    filters["min_path_cells_exclusive"] = MazeGenOptions{}.min_difficulty;
  } else if (cfg.task == "arc") {
    filters["arc_dir"] = cfg.arc_dir.filename().string();
  } else {
    throw InputError("unknown task '" + cfg.task + "' (expected sudoku, maze or arc)");
  }
  prov["filters"] = filters;
  prov["augment"] = cfg.augment;

  if (cfg.task == "arc") {
    gen_arc(cfg, prov);
    return;
  }
  prov["count"] = cfg.count;
  Generated g = cfg.task == "sudoku" ? generate_sudoku(cfg) : generate_maze(cfg);
  if (!cfg.split) {
    Dataset d{prov, std::move(g.examples)};
    if (cfg.task == "sudoku") augment_sudoku(d.examples, cfg.augment, cfg.seed);
    d.provenance["split"] = nullptr;
    write_dataset(cfg.out / "data.jsonl", d);
    return;
  }
  const SplitIndices idx = build_split(g.keys, *cfg.split, derive_seed(cfg.seed, 3));
  Dataset train{prov, {}};
  Dataset test{prov, {}};
  for (std::size_t i : idx.train) train.examples.push_back(g.examples[i]);
  for (std::size_t i : idx.test) test.examples.push_back(g.examples[i]);
  if (cfg.task == "sudoku") augment_sudoku(train.examples, cfg.augment, cfg.seed);
  train.provenance["split"] = "train";
  train.provenance["train_fraction"] = *cfg.split;
  test.provenance["split"] = "test";
  test.provenance["train_fraction"] = *cfg.split;
  write_dataset(cfg.out / "train.jsonl", train);
  write_dataset(cfg.out / "test.jsonl", test);
}

// ---------------------------------------------------------------- train

void run_train(const RunConfig& cfg) {
  if (cfg.steps < 0) throw InputError("--steps must be >= 0");
  if (cfg.checkpoint_every < 1) throw InputError("checkpoint_every must be >= 1");
  auto data = load_examples(cfg.data, "training data");

  std::optional<Trainer<float>> trainer;
  if (!cfg.resume.empty()) {
    require_file(cfg.resume, "resume checkpoint");
    Checkpoint ck = load_checkpoint(cfg.resume);
    if (!ck.trainer) throw InputError("checkpoint " + cfg.resume.string() + " holds no trainer state");
    if (static_cast<int>(data.front().input.size()) != ck.model.config.seq_len) {
      throw InputError("training data does not match the checkpoint's sequence length");
    }
    for (const auto& slot : ck.trainer->slots) {
      if (slot.example >= data.size()) throw InputError("training data is smaller than the checkpoint expects");
    }
    trainer.emplace(std::move(ck.model), std::move(data), std::move(*ck.trainer));
  } else {
    ModelConfig mc = fit_to_data(cfg.model, data);
    mc.seed = cfg.seed;
    mc.validate();
    trainer.emplace(Model<float>::create(mc), std::move(data));
  }

  const fs::path ckpt = cfg.out / "checkpoint.bin";
  const fs::path metrics_path = cfg.out / "metrics.jsonl";
  ojson meta;
  meta["data"] = cfg.data.filename().string();
  std::string metrics;
  std::vector<TrainMetrics> tail;
  auto save = [&] {
    save_checkpoint(ckpt, trainer->model(), &trainer->state(), meta);
    write_file_atomic(metrics_path, metrics);
  };

  while (trainer->state().optimizer.step < cfg.steps) {
    TrainMetrics m;
    try {
      m = trainer->step();
    } catch (const NumericalError&) {
      write_file_atomic(metrics_path, metrics);
      throw;
    }
    metrics += to_json(m).dump();
    metrics += '\n';
    if (!std::isfinite(m.loss) || !all_finite(trainer->model().params)) {
      write_file_atomic(metrics_path, metrics);
      throw NumericalError("non-finite loss at step " + std::to_string(m.step) +
                           "; last good checkpoint kept at " + ckpt.string());
    }
    tail.push_back(m);
    if (tail.size() > 100) tail.erase(tail.begin());
    if (m.step % cfg.checkpoint_every == 0) save();
  }
  save();

  ojson summary;
  summary["steps"] = trainer->state().optimizer.step;
  summary["parameters"] = trainer->model().params.count();
  summary["config"] = to_json(trainer->model().config);
  if (!tail.empty()) {
    summary["last"] = to_json(tail.back());
    double loss = 0.0;
    double em = 0.0;
    for (const auto& t : tail) {
      loss += t.loss;
      em += t.exact_match;
    }
    summary["recent_mean_loss"] = loss / static_cast<double>(tail.size());
    summary["recent_mean_exact_match"] = em / static_cast<double>(tail.size());
  }
  write_file_atomic(cfg.out / "summary.json", summary.dump(2) + "\n");
}

// ---------------------------------------------------------------- eval

void run_eval(const RunConfig& cfg) {
  require_file(cfg.checkpoint, "checkpoint");
  const auto data = load_examples(cfg.data, "evaluation data");
  const Checkpoint ck = load_checkpoint(cfg.checkpoint);
  const Model<float>& model = ck.model;
  const int limit = cfg.max_segments_eval > 0 ? cfg.max_segments_eval : model.config.max_segments;
  const EvalReport r = evaluate(model, data, limit);

  ojson report;
  report["examples"] = data.size();
  report["max_segments"] = limit;
  report["exact_match"] = r.exact_match;
  report["token_accuracy"] = r.token_accuracy;
  report["mean_segments"] = r.mean_segments;

  const std::string task = data.front().task;
  if (task == "sudoku") {
    std::map<long, std::pair<long, long>> by;  // difficulty -> (count, correct)
    for (std::size_t i = 0; i < data.size(); ++i) {
      auto& [n, ok] = by[static_cast<long>(data[i].difficulty.value_or(0.0))];
      ++n;
      ok += r.predictions[i].correct ? 1 : 0;
    }
    ojson rows = ojson::array();
    for (const auto& [d, v] : by) {
      ojson row;
      row["backtracks"] = d;
      row["count"] = v.first;
      row["exact_match"] = static_cast<double>(v.second) / static_cast<double>(v.first);
      rows.push_back(row);
    }
    report["by_difficulty"] = rows;
  } else if (task == "maze") {
    long optimal = 0;
    long valid = 0;
    long invalid = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const MazeInstance inst = maze_from_tokens(data[i].input);
      const auto path = decode_maze_path(r.predictions[i].tokens, inst);
      const PathVerdict v = path ? maze_check(*path, inst) : PathVerdict::kInvalid;
      if (v == PathVerdict::kInvalid) {
        ++invalid;
      } else {
        ++valid;
        optimal += v == PathVerdict::kCorrect ? 1 : 0;
      }
    }
    report["maze"] = {{"valid", valid}, {"optimal", optimal}, {"invalid", invalid}};
  }

  std::vector<ojson> preds;
  for (const auto& p : r.predictions) {
    ojson j;
    j["prediction"] = p.tokens;
    j["segments"] = p.segments;
    j["correct"] = p.correct;
    preds.push_back(std::move(j));
  }
  write_file_atomic(cfg.out / "predictions.jsonl", join_lines(preds));
  write_file_atomic(cfg.out / "eval.json", report.dump(2) + "\n");
}

// ---------------------------------------------------------------- arc-eval

void run_arc_eval(const RunConfig& cfg) {
  require_file(cfg.checkpoint, "checkpoint");
  if (cfg.n_augment < 1) throw InputError("--n-augment must be >= 1");
  const auto tasks = load_arc_dir(cfg.arc_dir);
  const Checkpoint ck = load_checkpoint(cfg.checkpoint);
  const Model<float>& model = ck.model;
  if (model.config.seq_len != kArcSeqLen) throw InputError("checkpoint was not trained on ARC grids");
  const int limit = cfg.max_segments_eval > 0 ? cfg.max_segments_eval : model.config.max_segments;

  struct Query {
    std::size_t task, test;
    ArcTransform transform;
  };
  std::vector<Query> queries;
  std::vector<TokenExample> batch;
  Rng rng(derive_seed(cfg.seed, 4));
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    for (std::size_t k = 0; k < tasks[i].test.size(); ++k) {
      const Grid& in = tasks[i].test[k].first;
      for (int a = 0; a < cfg.n_augment; ++a) {
        const ArcTransform t = a == 0 ? ArcTransform::identity() : fitting_transform({&in}, rng);
        TokenExample ex;
        ex.task = "arc";
        ex.input = encode_arc_grid(arc_augment(in, t), static_cast<int>(i));
        ex.target = ex.input;  // labels are scored in grid space below
        ex.puzzle_id = static_cast<int>(i);
        batch.push_back(std::move(ex));
        queries.push_back({i, k, t});
      }
    }
  }
  const EvalReport r = evaluate(model, batch, limit);

  std::vector<ojson> lines;
  long scored = 0;
  long solved = 0;
  std::size_t q = 0;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    for (std::size_t k = 0; k < tasks[i].test.size(); ++k) {
      std::vector<Grid> candidates;
      for (int a = 0; a < cfg.n_augment; ++a, ++q) {
        const auto g = decode_arc_grid(r.predictions[q].tokens);
        if (!g) continue;
        if (auto back = arc_invert(*g, queries[q].transform)) candidates.push_back(std::move(*back));
      }
      ojson j;
      j["task"] = tasks[i].name;
      j["test_index"] = k;
      j["valid_candidates"] = candidates.size();
      ojson attempts = ojson::array();
      bool hit = false;
      if (!candidates.empty()) {
        const auto [first, second] = arc_vote(candidates);
        attempts.push_back(grid_json(first));
        attempts.push_back(grid_json(second));
        const auto& label = tasks[i].test[k].second;
        hit = label && (first == *label || second == *label);
      }
      j["attempts"] = attempts;
      if (tasks[i].test[k].second) {
        ++scored;
        solved += hit ? 1 : 0;
        j["correct"] = hit;
      } else {
        j["correct"] = nullptr;
      }
      lines.push_back(std::move(j));
    }
  }
  ojson summary;
  summary["tasks"] = tasks.size();
  summary["test_inputs"] = lines.size();
  summary["n_augment"] = cfg.n_augment;
  summary["scored"] = scored;
  summary["pass_at_2"] = scored > 0 ? ojson(static_cast<double>(solved) / static_cast<double>(scored)) : ojson(nullptr);
  write_file_atomic(cfg.out / "arc_predictions.jsonl", join_lines(lines));
  write_file_atomic(cfg.out / "arc_eval.json", summary.dump(2) + "\n");
}

// ---------------------------------------------------------------- analyze

namespace {

std::vector<ExampleTrace> trace_inputs(const Model<float>& model, const std::vector<TokenExample>& data,
                                       int samples, int segments) {
  const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(std::max(samples, 0)), data.size());
  std::vector<ExampleTrace> traces(n);
  parallel_for(n, [&](std::size_t i) { traces[i] = collect_trace(model, data[i].input, segments); });
  return traces;
}

std::vector<ojson> analyze_pr(std::span<const ExampleTrace> traces) {
  const double h = participation_ratio(pool_states(traces, true));
  const double l = participation_ratio(pool_states(traces, false));
  const auto n = static_cast<long>(traces.size());
  return {plot_point("z_H", n, h), plot_point("z_L", n, l), plot_point("ratio", n, h / l)};
}

std::vector<ojson> analyze_residuals(std::span<const ExampleTrace> traces) {
  std::vector<double> low;
  std::vector<double> high;
  long spikes = 0;
  long boundaries = 0;
  for (const auto& t : traces) {
    const ResidualSeries r = residual_series(t);
    low.resize(r.low.size(), 0.0);
    high.resize(r.high.size(), 0.0);
    for (std::size_t i = 0; i < r.low.size(); ++i) {
      low[i] += r.low[i];
      high[i] += r.high[i];
    }
    boundaries += static_cast<long>(r.spikes.size());
    spikes += std::count(r.spikes.begin(), r.spikes.end(), true);
  }
  std::vector<ojson> out;
  const double n = static_cast<double>(traces.size());
  for (std::size_t i = 0; i < low.size(); ++i) out.push_back(plot_point("z_L", i + 1, low[i] / n));
  for (std::size_t i = 0; i < high.size(); ++i) out.push_back(plot_point("z_H", i + 1, high[i] / n));
  out.push_back(plot_point("boundary_spike_fraction", boundaries,
                           boundaries > 0 ? static_cast<double>(spikes) / static_cast<double>(boundaries) : 0.0));
  return out;
}

std::vector<ojson> analyze_pca(std::span<const ExampleTrace> traces, int k) {
  std::vector<ojson> out;
  for (const bool high : {true, false}) {
    const std::string name = high ? "z_H" : "z_L";
    const PcaResult p = pca_project(pool_states(traces, high), k);
    for (Eigen::Index c = 0; c < p.variances.size(); ++c) {
      out.push_back(plot_point(name + "/variance", c + 1, p.variances(c)));
    }
    Eigen::Index row = 0;
    for (std::size_t t = 0; t < traces.size(); ++t) {
      const std::size_t steps = (high ? traces[t].z_high : traces[t].z_low).size();
      for (std::size_t s = 0; s < steps; ++s, ++row) {
        std::vector<double> y(static_cast<std::size_t>(p.projected.cols()));
        for (Eigen::Index c = 0; c < p.projected.cols(); ++c) y[static_cast<std::size_t>(c)] = p.projected(row, c);
        out.push_back(plot_point(name + "/" + std::to_string(t), s, y));
      }
    }
  }
  return out;
}

std::vector<ojson> analyze_intermediate(const Model<float>& model, const std::vector<TokenExample>& data,
                                        std::span<const ExampleTrace> traces) {
  std::vector<ojson> out;
  for (std::size_t t = 0; t < traces.size(); ++t) {
    const bool sudoku = data[t].task == "sudoku";
    const auto decodes = intermediate_predictions(model, data[t].input, traces[t], sudoku);
    const std::string id = std::to_string(t);
    for (const auto& d : decodes) {
      out.push_back(plot_point("prediction/" + id, d.step, d.tokens));
      out.push_back(plot_point("changed/" + id, d.step, d.changed));
      if (sudoku) out.push_back(plot_point("violations/" + id, d.step, d.violations));
      std::size_t wrong = 0;
      for (std::size_t k = 0; k < d.tokens.size(); ++k) wrong += d.tokens[k] != data[t].target[k] ? 1 : 0;
      out.push_back(plot_point("wrong_cells/" + id, d.step, wrong));
    }
  }
  return out;
}

std::vector<ojson> analyze_pr_scaling(std::span<const ExampleTrace> traces, std::vector<int> counts) {
  const int n = static_cast<int>(traces.size());
  if (counts.empty()) {
    for (int c = 10; c <= n; c += 10) counts.push_back(c);
    if (counts.empty() || counts.back() != n) counts.push_back(n);
  }
  std::vector<ojson> out;
  for (const auto& p : pr_scaling_curve(traces, counts)) {
    out.push_back(plot_point("z_H", p.trajectories, p.pr_high));
    out.push_back(plot_point("z_L", p.trajectories, p.pr_low));
  }
  return out;
}

}  // namespace

void run_analyze(const RunConfig& cfg) {
  static const std::map<std::string, std::string> kFiles = {{"pr", "pr.jsonl"},
                                                            {"residuals", "residuals.jsonl"},
                                                            {"pca", "pca.jsonl"},
                                                            {"intermediate", "intermediate.jsonl"},
                                                            {"pr-scaling", "pr_scaling.jsonl"}};
  const auto file = kFiles.find(cfg.mode);
  if (file == kFiles.end()) {
    throw InputError("unknown analyze mode '" + cfg.mode + "' (expected pr, residuals, pca, intermediate or pr-scaling)");
  }
  if (cfg.samples < 1) throw InputError("--samples must be >= 1");
  if (cfg.trace_segments < 1) throw InputError("trace_segments must be >= 1");
  require_file(cfg.checkpoint, "checkpoint");
  const auto data = load_examples(cfg.data, "analysis data");
  const Checkpoint ck = load_checkpoint(cfg.checkpoint);
  const auto traces = trace_inputs(ck.model, data, cfg.samples, cfg.trace_segments);

  std::vector<ojson> records;
  if (cfg.mode == "pr") records = analyze_pr(traces);
  if (cfg.mode == "residuals") records = analyze_residuals(traces);
  if (cfg.mode == "pca") records = analyze_pca(traces, cfg.pca_k);
  if (cfg.mode == "intermediate") records = analyze_intermediate(ck.model, data, traces);
  if (cfg.mode == "pr-scaling") records = analyze_pr_scaling(traces, cfg.trajectory_counts);
  write_file_atomic(cfg.out / file->second, join_lines(records));
}

// ---------------------------------------------------------------- sweep

void run_sweep(const RunConfig& cfg) {
  const auto train = load_examples(cfg.data, "training data");
  const auto test = load_examples(cfg.test_data, "test data");
  ModelConfig base = fit_to_data(cfg.model, train);
  base.seed = cfg.seed;

  if (cfg.sweep == "depth-width") {
    std::vector<SweepVariant> variants;
    if (!cfg.variants.is_array()) throw ConfigError("variants must be an array");
    for (const auto& v : cfg.variants) {
      SweepVariant sv;
      try {
        sv.name = v.at("name").get<std::string>();
      } catch (const nlohmann::json::exception&) {
        throw ConfigError("every sweep variant needs a name");
      }
      sv.config = v.contains("model") ? config_from_json(v.at("model"), base) : base;
      sv.config.seq_len = base.seq_len;
      sv.config.vocab_size = base.vocab_size;
      variants.push_back(std::move(sv));
    }
    if (variants.empty()) {
      const int d = base.hidden_dim;
      auto add = [&](std::string name, Arch arch, int width, int depth) {
        ModelConfig c = base;
        c.arch = arch;
        c.hidden_dim = width;
        c.baseline_depth = depth;
        variants.push_back({std::move(name), c});
      };
      add("hrm", Arch::kHrm, d, base.baseline_depth);
      for (int depth : {2, 4, 8}) add("ff-d" + std::to_string(d) + "-L" + std::to_string(depth), Arch::kFeedforward, d, depth);
      add("ff-d" + std::to_string(2 * d) + "-L4", Arch::kFeedforward, 2 * d, 4);
    }
    const auto rows = depth_width_sweep(variants, train, test, cfg.steps);
    std::vector<ojson> table;
    std::vector<ojson> plot;
    for (const auto& r : rows) {
      table.push_back(to_json(r));
      plot.push_back(plot_point(r.name, r.parameters, r.test_exact));
    }
    write_file_atomic(cfg.out / "sweep_table.jsonl", join_lines(table));
    write_file_atomic(cfg.out / "sweep.jsonl", join_lines(plot));
    return;
  }
  if (cfg.sweep == "act") {
    std::vector<int> limits = cfg.eval_limits;
    if (limits.empty()) {
      for (int m = 1; m <= 2 * base.max_segments; ++m) limits.push_back(m);
    }
    const auto rows = act_comparison(base, base.max_segments, limits, train, test, cfg.steps);
    std::vector<ojson> table;
    std::vector<ojson> plot;
    for (const auto& r : rows) {
      table.push_back(to_json(r));
      plot.push_back(plot_point(r.model + "/exact", r.eval_max_segments, r.exact));
      plot.push_back(plot_point(r.model + "/mean_segments", r.eval_max_segments, r.mean_segments));
    }
    write_file_atomic(cfg.out / "act_table.jsonl", join_lines(table));
    write_file_atomic(cfg.out / "act.jsonl", join_lines(plot));
    return;
  }
  throw InputError("unknown sweep '" + cfg.sweep + "' (expected depth-width or act)");
}

}  // namespace hrm
