#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

#include "hrm/checkpoint.hpp"
#include "hrm/commands.hpp"
#include "hrm/errors.hpp"
#include "test_support.hpp"

namespace hrm {
namespace {

namespace fs = std::filesystem;
using testing::scratch_dir;
using testing::slurp;

int run_binary(const std::string& args) {
  const std::string cmd = std::string(HRM_BINARY) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

RunConfig tiny_run(const fs::path& out) {
  RunConfig c;
  c.model = testing::tiny_config();
  c.model.seq_len = 81;
  c.model.batch_size = 2;
  c.seed = 5;
  c.out = out;
  return c;
}

fs::path gen_sudoku(const fs::path& dir, long count) {
  RunConfig c = tiny_run(dir);
  c.count = count;
  run_gen(c);
  return dir / "data.jsonl";
}

TEST(RunConfig, RejectsUnknownKeys) {
  EXPECT_THROW(run_config_from_json(nlohmann::json::parse(R"({"stpes": 3})")), ConfigError);
  EXPECT_THROW(run_config_from_json(nlohmann::json::parse(R"({"model": {"hiden_dim": 3}})")), ConfigError);
  const auto c = run_config_from_json(nlohmann::json::parse(R"({"steps": 3, "model": {"hidden_dim": 32}})"));
  EXPECT_EQ(c.steps, 3);
  EXPECT_EQ(c.model.hidden_dim, 32);
}

TEST(Gen, ZeroCountWritesHeaderOnly) {
  const auto dir = scratch_dir("gen0");
  const auto path = gen_sudoku(dir, 0);
  const auto ls = lines(slurp(path));
  ASSERT_EQ(ls.size(), 1u);
  EXPECT_NE(ls[0].find("\"provenance\""), std::string::npos);
}

TEST(Gen, ByteIdenticalPerSeed) {
  const auto a = gen_sudoku(scratch_dir("gen_a"), 12);
  const auto b = gen_sudoku(scratch_dir("gen_b"), 12);
  EXPECT_EQ(slurp(a), slurp(b));
  RunConfig c = tiny_run(scratch_dir("gen_c"));
  c.count = 12;
  c.seed = 6;
  run_gen(c);
  EXPECT_NE(slurp(a), slurp(c.out / "data.jsonl"));
}

TEST(Gen, SplitKeepsGroupsApart) {
  RunConfig c = tiny_run(scratch_dir("gen_split"));
  c.count = 20;
  c.split = 0.75;
  c.augment = 2;
  run_gen(c);
  const auto train = lines(slurp(c.out / "train.jsonl"));
  const auto test = lines(slurp(c.out / "test.jsonl"));
  EXPECT_EQ(train.size() - 1, 15u * 3u);
  EXPECT_EQ(test.size() - 1, 5u);
}

TEST(Train, ZeroStepsWritesLoadableCheckpoint) {
  const auto dir = scratch_dir("train0");
  RunConfig c = tiny_run(dir);
  c.data = gen_sudoku(dir, 4);
  c.steps = 0;
  run_train(c);
  const auto ck = load_checkpoint(dir / "checkpoint.bin");
  ASSERT_TRUE(ck.trainer.has_value());
  EXPECT_EQ(ck.trainer->optimizer.step, 0);
  EXPECT_EQ(ck.model.config.seq_len, 81);
}

TEST(Checkpoint, BitwiseRoundTrip) {
  const auto dir = scratch_dir("ckpt");
  RunConfig c = tiny_run(dir);
  c.data = gen_sudoku(dir, 4);
  c.steps = 3;
  run_train(c);
  const auto first = slurp(dir / "checkpoint.bin");
  const auto ck = load_checkpoint(dir / "checkpoint.bin");
  save_checkpoint(dir / "again.bin", ck.model, &*ck.trainer, ck.meta);
  EXPECT_EQ(first, slurp(dir / "again.bin"));
}

TEST(Checkpoint, RejectsCorruptFiles) {
  const auto dir = scratch_dir("ckpt_bad");
  {
    std::ofstream(dir / "bad.bin") << "not a checkpoint";
  }
  EXPECT_THROW(load_checkpoint(dir / "bad.bin"), InputError);
  RunConfig c = tiny_run(dir);
  c.data = gen_sudoku(dir, 4);
  c.steps = 0;
  run_train(c);
  const auto bytes = slurp(dir / "checkpoint.bin");
  {
    std::ofstream(dir / "short.bin", std::ios::binary) << bytes.substr(0, bytes.size() - 7);
  }
  EXPECT_THROW(load_checkpoint(dir / "short.bin"), InputError);
}

TEST(Train, ResumeMatchesUninterrupted) {
  const auto dir = scratch_dir("resume");
  const auto data = gen_sudoku(dir, 6);
  RunConfig full = tiny_run(dir / "full");
  full.data = data;
  full.steps = 6;
  full.checkpoint_every = 3;
  run_train(full);

  RunConfig part = full;
  part.out = dir / "part";
  part.steps = 3;
  run_train(part);
  RunConfig rest = full;
  rest.out = dir / "rest";
  rest.resume = part.out / "checkpoint.bin";
  run_train(rest);

  const auto a = lines(slurp(full.out / "metrics.jsonl"));
  const auto b = lines(slurp(part.out / "metrics.jsonl"));
  const auto r = lines(slurp(rest.out / "metrics.jsonl"));
  ASSERT_EQ(a.size(), 6u);
  ASSERT_EQ(b.size() + r.size(), 6u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(a[i], b[i]);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(a[3 + i], r[i]);
  EXPECT_EQ(slurp(full.out / "checkpoint.bin"), slurp(rest.out / "checkpoint.bin"));
}

TEST(Eval, SingleSegmentLimit) {
  const auto dir = scratch_dir("eval");
  RunConfig c = tiny_run(dir);
  c.data = gen_sudoku(dir, 5);
  c.steps = 2;
  run_train(c);
  c.checkpoint = dir / "checkpoint.bin";
  c.max_segments_eval = 1;
  run_eval(c);
  const auto report = nlohmann::json::parse(slurp(dir / "eval.json"));
  EXPECT_EQ(report["mean_segments"].get<double>(), 1.0);
  EXPECT_EQ(report["examples"].get<int>(), 5);
  EXPECT_TRUE(report.contains("by_difficulty"));
  EXPECT_EQ(lines(slurp(dir / "predictions.jsonl")).size(), 5u);
}

TEST(Analyze, ModesWriteOutputs) {
  const auto dir = scratch_dir("analyze");
  RunConfig c = tiny_run(dir);
  c.data = gen_sudoku(dir, 6);
  c.steps = 1;
  run_train(c);
  c.checkpoint = dir / "checkpoint.bin";
  c.samples = 4;
  c.trace_segments = 2;
  for (const char* mode : {"pr", "residuals", "pca", "intermediate", "pr-scaling"}) {
    c.mode = mode;
    EXPECT_NO_THROW(run_analyze(c)) << mode;
  }
  for (const char* f : {"pr.jsonl", "residuals.jsonl", "pca.jsonl", "intermediate.jsonl", "pr_scaling.jsonl"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  c.mode = "bogus";
  EXPECT_THROW(run_analyze(c), InputError);
}

TEST(Binary, ExitCodes) {
  const auto dir = scratch_dir("exit");
  const auto data = gen_sudoku(dir, 3);
  const std::string out = " --out " + dir.string();
  EXPECT_EQ(run_binary("gen --task sudoku --count 2 --seed 1" + out), 0);
  EXPECT_EQ(run_binary("gen --task nonsense" + out), 1);
  EXPECT_EQ(run_binary("frobnicate"), 1);
  EXPECT_EQ(run_binary("eval --checkpoint " + (dir / "missing.bin").string() + " --data " + data.string() + out), 1);
  {
    std::ofstream(dir / "cfg.json") << R"({"stpes": 1})";
  }
  EXPECT_EQ(run_binary("train --config " + (dir / "cfg.json").string() + " --data " + data.string() + out), 1);
  {
    std::ofstream(dir / "hot.json") << R"({"model": {"lr": 1e30, "hidden_dim": 16, "n_heads": 2,
      "blocks_per_module": 1, "batch_size": 2, "warmup_steps": 0}})";
  }
  EXPECT_EQ(run_binary("train --config " + (dir / "hot.json").string() + " --steps 20 --data " + data.string() +
                       " --out " + (dir / "hot").string()),
            2);
  EXPECT_EQ(run_binary("analyze --mode bogus --checkpoint " + (dir / "hot" / "checkpoint.bin").string() +
                       " --data " + data.string() + out),
            1);
}

TEST(Binary, CliMatchesLibraryOutput) {
  const auto a = scratch_dir("cli_a");
  const auto b = scratch_dir("cli_b");
  ASSERT_EQ(run_binary("gen --task maze --count 2 --seed 9 --out " + a.string()), 0);
  ASSERT_EQ(run_binary("gen --task maze --count 2 --seed 9 --out " + b.string()), 0);
  EXPECT_EQ(slurp(a / "data.jsonl"), slurp(b / "data.jsonl"));
}

void write_arc_task(const fs::path& path, int shift) {
  nlohmann::json task;
  auto pair = [&](int v) {
    nlohmann::json p;
    p["input"] = {{v, 0}, {0, v}};
    p["output"] = {{(v + shift) % 10, 0}, {0, (v + shift) % 10}};
    return p;
  };
  task["train"] = {pair(1), pair(2)};
  task["test"] = {pair(3)};
  std::ofstream(path) << task.dump();
}

TEST(ArcEval, SyntheticDirectory) {
  const auto dir = scratch_dir("arc");
  fs::create_directories(dir / "tasks");
  write_arc_task(dir / "tasks" / "a.json", 1);
  write_arc_task(dir / "tasks" / "b.json", 2);
  RunConfig c = tiny_run(dir);
  c.task = "arc";
  c.arc_dir = dir / "tasks";
  c.augment = 1;
  run_gen(c);
  ASSERT_TRUE(fs::exists(dir / "train.jsonl"));
  c.data = dir / "train.jsonl";
  c.steps = 1;
  c.model.max_segments = 1;
  run_train(c);
  c.checkpoint = dir / "checkpoint.bin";
  c.n_augment = 2;
  run_arc_eval(c);
  const auto report = nlohmann::json::parse(slurp(dir / "arc_eval.json"));
  EXPECT_EQ(report["tasks"].get<int>(), 2);
  EXPECT_EQ(report["test_inputs"].get<int>(), 2);
  EXPECT_TRUE(report["pass_at_2"].is_number());
}

}  // namespace
}  // namespace hrm
