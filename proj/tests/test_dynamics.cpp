#include <gtest/gtest.h>

#include "hrm/errors.hpp"
#include "hrm/gradcheck.hpp"
#include "test_support.hpp"

namespace hrm {
namespace {

struct Batch {
  std::vector<int> tokens, targets, segments;
};

Batch random_batch(const ModelConfig& cfg, int batch, std::uint64_t seed) {
  Rng rng(seed);
  Batch b;
  b.tokens = testing::random_tokens(rng, static_cast<std::size_t>(batch * cfg.seq_len), 1, cfg.vocab_size - 1);
  b.targets = testing::random_tokens(rng, b.tokens.size(), 1, cfg.vocab_size - 1);
  b.segments.assign(static_cast<std::size_t>(batch), 1);
  return b;
}

TEST(InitialState, TruncatedAndDeterministic) {
  ModelConfig cfg = testing::tiny_config(21);
  const auto a = Model<double>::create(cfg);
  const auto b = Model<double>::create(cfg);
  EXPECT_EQ(a.initial.z_high.rows(), cfg.seq_len);
  EXPECT_EQ(a.initial.z_high.cols(), cfg.hidden_dim);
  EXPECT_LE(a.initial.z_high.cwiseAbs().maxCoeff(), 2.0);
  EXPECT_LE(a.initial.z_low.cwiseAbs().maxCoeff(), 2.0);
  EXPECT_EQ(a.initial.z_low, b.initial.z_low);
  EXPECT_EQ(a.params.head, b.params.head);
  cfg.seed = 22;
  EXPECT_NE(Model<double>::create(cfg).initial.z_low, a.initial.z_low);
}

TEST(Segment, StepCountersForRandomSchedules) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    ModelConfig cfg = testing::tiny_config(static_cast<std::uint64_t>(trial));
    cfg.cycles = rng.uniform_int(1, 4);
    cfg.low_steps = rng.uniform_int(1, 4);
    const auto m = Model<float>::create(cfg);
    const auto b = random_batch(cfg, 1, static_cast<std::uint64_t>(trial));
    const auto r = segment_forward(m, m.fresh_carry(1), b.tokens, /*record=*/true, /*capture_trace=*/true);
    EXPECT_EQ(r.counters.low_updates, cfg.cycles * cfg.low_steps);
    EXPECT_EQ(r.counters.high_updates, cfg.cycles);
    EXPECT_EQ(r.counters.recorded_low, 1);
    EXPECT_EQ(r.counters.recorded_high, 1);
    ASSERT_TRUE(r.trace);
    EXPECT_EQ(r.trace->size(), static_cast<std::size_t>(cfg.cycles * cfg.low_steps + 1));
  }
}

TEST(Segment, HighStateOnlyChangesAtCycleEnds) {
  ModelConfig cfg = testing::tiny_config();
  cfg.cycles = 3;
  cfg.low_steps = 3;
  const auto m = Model<double>::create(cfg);
  const auto b = random_batch(cfg, 1, 1);
  const auto r = segment_forward(m, m.fresh_carry(1), b.tokens, false, true);
  const auto& tr = *r.trace;
  for (std::size_t i = 1; i < tr.size(); ++i) {
    const bool boundary = i % static_cast<std::size_t>(cfg.low_steps) == 0;
    EXPECT_EQ(boundary, tr.z_high[i] != tr.z_high[i - 1]) << "step " << i;
    EXPECT_NE(tr.z_low[i], tr.z_low[i - 1]);
  }
}

TEST(Segment, RequiresSeveredCarry) {
  const auto m = Model<double>::create(testing::tiny_config());
  auto carry = m.fresh_carry(1);
  carry.severed = false;
  const auto b = random_batch(m.config, 1, 2);
  EXPECT_THROW(segment_forward(m, carry, b.tokens, true), ContractError);
}

TEST(Segment, BatchRowsAreIndependent) {
  const auto m = Model<double>::create(testing::tiny_config());
  const auto b = random_batch(m.config, 2, 3);
  const auto both = segment_forward(m, m.fresh_carry(2), b.tokens, false);
  const std::vector<int> second(b.tokens.begin() + 8, b.tokens.end());
  const auto alone = segment_forward(m, m.fresh_carry(1), second, false);
  EXPECT_LT((both.logits.bottomRows(8) - alone.logits).cwiseAbs().maxCoeff(), 1e-12);
}

// Segment-2 gradients computed from a carry produced by a recorded segment 1
// equal those computed from a replay of segment 1 without recording, and
// equal finite differences that treat the carry as a constant.
TEST(Severance, TwoSegmentReplay) {
  const auto m = Model<double>::create(testing::tiny_config(31));
  const auto b = random_batch(m.config, 2, 4);
  const auto first = segment_forward(m, m.fresh_carry(2), b.tokens, /*record=*/true);
  const auto replay = segment_forward(m, m.fresh_carry(2), b.tokens, /*record=*/false);
  std::vector<int> seg2(2, 2);
  const auto g_live = supervised_segment(m, first.carry, b.tokens, b.targets, seg2).grads;
  const auto g_replay = supervised_segment(m, replay.carry, b.tokens, b.targets, seg2).grads;
  std::vector<const Mat<double>*> a, c;
  g_live.for_each([&](ParamGroup, const std::string&, const Mat<double>& x) { a.push_back(&x); });
  g_replay.for_each([&](ParamGroup, const std::string&, const Mat<double>& x) { c.push_back(&x); });
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_LE((*a[k] - *c[k]).cwiseAbs().maxCoeff(), 1e-12);
  const auto check = one_step_gradient_check(m, first.carry, b.tokens, b.targets, seg2);
  EXPECT_LE(check.worst, 1e-3);
}

TEST(GradCheck, EveryGroupWithinTolerance) {
  ModelConfig cfg = testing::tiny_config(41);
  const auto m = Model<double>::create(cfg);
  const auto b = random_batch(cfg, 2, 6);
  const auto r = one_step_gradient_check(m, m.fresh_carry(2), b.tokens, b.targets, b.segments);
  ASSERT_EQ(r.group_error.size(), 5u);
  for (const auto& [group, err] : r.group_error) EXPECT_LE(err, 1e-3) << group;
  EXPECT_LE(r.group_error.at("output"), 1e-6);
}

TEST(GradCheck, ZeroSignalTargets) {
  ModelConfig cfg = testing::tiny_config(43);
  const auto m = Model<double>::create(cfg);
  auto b = random_batch(cfg, 1, 7);
  const auto fwd = segment_forward(m, m.fresh_carry(1), b.tokens, false);
  b.targets = argmax_tokens<double>(fwd.logits);
  for (auto& t : b.targets) t = std::max(t, 1);
  const auto r = one_step_gradient_check(m, m.fresh_carry(1), b.tokens, b.targets, b.segments);
  for (const auto& [group, err] : r.group_error) {
    EXPECT_LE(err, 1e-3) << group;
    EXPECT_NEAR(r.analytic_norm.at(group), r.numeric_norm.at(group), 1e-3 * std::max(1.0, r.numeric_norm.at(group)));
  }
}

TEST(GradCheck, StablemaxAndBaselines) {
  for (Arch arch : {Arch::kHrm, Arch::kFeedforward, Arch::kRecurrent}) {
    ModelConfig cfg = testing::tiny_config(47);
    cfg.arch = arch;
    cfg.use_stablemax = true;
    cfg.baseline_depth = 2;
    cfg.baseline_loops = 3;
    const auto m = Model<double>::create(cfg);
    const auto b = random_batch(cfg, 2, 8);
    const auto r = one_step_gradient_check(m, m.fresh_carry(2), b.tokens, b.targets, b.segments);
    EXPECT_LE(r.worst, 1e-3) << to_string(arch);
  }
}

TEST(Baselines, StandaloneForwardMatchesSegment) {
  ModelConfig cfg = testing::tiny_config();
  cfg.baseline_depth = 2;
  cfg.baseline_loops = 3;
  for (Arch arch : {Arch::kFeedforward, Arch::kRecurrent}) {
    cfg.arch = arch;
    const auto m = Model<double>::create(cfg);
    EXPECT_TRUE(m.params.high.empty());
    const auto b = random_batch(cfg, 1, 9);
    const auto seg = segment_forward(m, m.fresh_carry(1), b.tokens, false);
    const auto direct = baseline_forward<double>(arch, cfg.baseline_loops, m.params, m.shape(), b.tokens);
    EXPECT_LT((seg.logits - direct).cwiseAbs().maxCoeff(), 1e-12) << to_string(arch);
  }
}

TEST(Baselines, RejectsHrmVariant) {
  const auto m = Model<double>::create(testing::tiny_config());
  const auto b = random_batch(m.config, 1, 1);
  EXPECT_THROW(baseline_forward<double>(Arch::kHrm, 1, m.params, m.shape(), b.tokens), InputError);
}

}  // namespace
}  // namespace hrm
