#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "hrm/training.hpp"
#include "test_support.hpp"

namespace hrm {
namespace {

// Upper 1% points of the chi-square distribution, df = 1..8.
constexpr double kChi2Crit01[] = {0, 6.635, 9.210, 11.345, 13.277, 15.086, 16.812, 18.475, 20.090};

std::vector<TokenExample> toy_data(const ModelConfig& cfg, int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<TokenExample> out;
  for (int i = 0; i < n; ++i) {
    TokenExample ex;
    ex.task = "toy";
    ex.input = testing::random_tokens(rng, static_cast<std::size_t>(cfg.seq_len), 1, cfg.vocab_size - 1);
    ex.target = ex.input;
    std::reverse(ex.target.begin(), ex.target.end());
    out.push_back(std::move(ex));
  }
  return out;
}

TEST(QTargets, BranchDefinitions) {
  const auto a = q_targets(true, 0.2, 0.7, 1, 4);
  EXPECT_EQ(a.halt, 1.0);
  EXPECT_EQ(a.cont, 0.7);
  const auto b = q_targets(false, 0.9, 0.3, 2, 4);
  EXPECT_EQ(b.halt, 0.0);
  EXPECT_EQ(b.cont, 0.9);
  const auto c = q_targets(false, 0.1, 0.8, 4, 4);
  EXPECT_EQ(c.cont, 0.1);
}

TEST(HaltDecision, BranchDefinitions) {
  EXPECT_TRUE(halt_decision(4, 0.0, 1.0, 1, 4));
  EXPECT_TRUE(halt_decision(2, 0.6, 0.5, 2, 4));
  EXPECT_FALSE(halt_decision(1, 0.6, 0.5, 2, 4));
  EXPECT_FALSE(halt_decision(2, 0.5, 0.5, 1, 4));
  EXPECT_FALSE(halt_decision(3, 0.1, 0.5, 1, 4));
}

TEST(HaltDecision, RandomDrawsAgainstReference) {
  Rng rng(1);
  for (int i = 0; i < 20000; ++i) {
    const int mmax = rng.uniform_int(1, 8);
    const int m = rng.uniform_int(1, mmax);
    const int mmin = rng.uniform_int(1, mmax);
    const double qh = rng.uniform(), qc = rng.uniform();
    const bool correct = rng.uniform() < 0.5;
    const bool expect_halt = m >= mmax ? true : (qh > qc && m >= mmin);
    ASSERT_EQ(halt_decision(m, qh, qc, mmin, mmax), expect_halt);
    const auto g = q_targets(correct, qh, qc, m, mmax);
    ASSERT_EQ(g.halt, correct ? 1.0 : 0.0);
    ASSERT_EQ(g.cont, m >= mmax ? qh : std::max(qh, qc));
  }
}

TEST(SampleMinSegments, ChiSquare) {
  Rng rng(17);
  const double eps = 0.3;
  const int mmax = 5;
  const int n = 100000;
  std::vector<double> counts(static_cast<std::size_t>(mmax + 1), 0.0);
  for (int i = 0; i < n; ++i) {
    const int k = sample_min_segments(eps, mmax, rng);
    ASSERT_GE(k, 1);
    ASSERT_LE(k, mmax);
    counts[static_cast<std::size_t>(k)] += 1.0;
  }
  EXPECT_EQ(counts[0], 0.0);
  double chi2 = 0.0;
  for (int k = 1; k <= mmax; ++k) {
    const double p = k == 1 ? 1.0 - eps : eps / (mmax - 1);
    const double e = p * n;
    chi2 += (counts[static_cast<std::size_t>(k)] - e) * (counts[static_cast<std::size_t>(k)] - e) / e;
  }
  EXPECT_LT(chi2, kChi2Crit01[mmax - 1]);
}

TEST(SampleMinSegments, SingleSegmentHasNoExploration) {
  Rng rng(2);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(sample_min_segments(0.9, 1, rng), 1);
}

TEST(Losses, BceLogitMatchesProbabilityForm) {
  for (double l : {-30.0, -2.0, 0.0, 0.7, 15.0}) {
    for (double g : {0.0, 0.3, 1.0}) {
      const double q = 1.0 / (1.0 + std::exp(-l));
      if (std::abs(l) < 20) EXPECT_NEAR(binary_cross_entropy_logit(l, g), binary_cross_entropy(q, g), 1e-9);
      EXPECT_TRUE(std::isfinite(binary_cross_entropy_logit(l, g)));
    }
  }
}

TEST(Losses, SequenceLossGradientAndPadding) {
  Rng rng(3);
  Mat<double> logits(6, 5);
  for (Eigen::Index i = 0; i < logits.size(); ++i) logits.data()[i] = 2.0 * rng.normal();
  const std::vector<int> targets{1, 0, 4, 2, 0, 3};
  for (bool stable : {false, true}) {
    Mat<double> grad(6, 5);
    Eigen::Ref<Mat<double>> gref(grad);
    const double base = sequence_loss<double>(logits, targets, stable, &gref, 2.0);
    EXPECT_GT(base, 0.0);
    EXPECT_EQ(grad.row(1).cwiseAbs().sum(), 0.0);
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < logits.size(); ++i) {
      Mat<double> p = logits;
      p.data()[i] += h;
      const double up = sequence_loss<double>(p, targets, stable);
      p.data()[i] -= 2 * h;
      const double down = sequence_loss<double>(p, targets, stable);
      EXPECT_NEAR(2.0 * (up - down) / (2 * h), grad.data()[i], 1e-6);
    }
  }
  const std::vector<int> pads(6, kPadToken);
  EXPECT_THROW(sequence_loss<double>(logits, pads, false), InputError);
}

TEST(Optimizer, WarmupSchedule) {
  ModelConfig cfg;
  cfg.lr = 1e-3;
  cfg.warmup_steps = 10;
  EXPECT_DOUBLE_EQ(learning_rate_at(cfg, 1), 1e-4);
  EXPECT_DOUBLE_EQ(learning_rate_at(cfg, 10), 1e-3);
  EXPECT_DOUBLE_EQ(learning_rate_at(cfg, 500), 1e-3);
}

TEST(Optimizer, ClosedFormDecayAndConstantGradient) {
  ModelConfig cfg = testing::tiny_config();
  cfg.lr = 0.01;
  cfg.weight_decay = 0.5;
  Rng rng(4);
  auto params = init_params<double>(cfg, rng);
  const auto w0 = params;
  auto state = OptimizerState<double>::for_params(params);
  auto grads = params.zeros_like();
  const int steps = 7;
  for (int k = 0; k < steps; ++k) optimizer_step(params, grads, state, cfg);
  const double decay = std::pow(1.0 - 0.01 * 0.5, steps);
  EXPECT_LT((params.head - w0.head * decay).cwiseAbs().maxCoeff(), 1e-14);

  // With a constant gradient the bias-corrected moments are g and g^2, so the
  // step is lr * atan2(g, |g|) = lr * sign(g) * pi / 4.
  auto p2 = w0;
  auto st2 = OptimizerState<double>::for_params(p2);
  auto g2 = p2.zeros_like();
  g2.head.setConstant(-3.0);
  Mat<double> expect = w0.head;
  for (int k = 0; k < steps; ++k) {
    optimizer_step(p2, g2, st2, cfg);
    expect = expect * (1.0 - 0.005) + Mat<double>::Constant(expect.rows(), expect.cols(), 0.01 * std::numbers::pi / 4);
  }
  EXPECT_LT((p2.head - expect).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Optimizer, RejectsNonFiniteGradient) {
  ModelConfig cfg = testing::tiny_config();
  Rng rng(4);
  auto params = init_params<float>(cfg, rng);
  auto state = OptimizerState<float>::for_params(params);
  auto grads = params.zeros_like();
  grads.head(0, 0) = std::numeric_limits<float>::quiet_NaN();
  EXPECT_THROW(optimizer_step(params, grads, state, cfg), NumericalError);
}

// Two deep-supervision steps on one example equal two independent segment
// updates, where segment 2 starts from a no-grad replay of segment 1.
TEST(DeepSupervision, TwoSegmentReplayOracle) {
  ModelConfig cfg = testing::tiny_config(9);
  cfg.batch_size = 1;
  cfg.max_segments = 2;
  cfg.act = false;
  cfg.warmup_steps = 3;
  const auto data = toy_data(cfg, 1, 1);
  const auto model = Model<double>::create(cfg);
  Trainer<double> trainer(model, data);
  trainer.step();
  trainer.step();

  auto params = model.params;
  auto opt = OptimizerState<double>::for_params(params);
  const auto& ex = data[0];
  const std::vector<int> seg1{1}, seg2{2};
  const auto s1 = supervised_segment(model, model.fresh_carry(1), ex.input, ex.target, seg1);
  optimizer_step(params, s1.grads, opt, cfg);
  const auto replay = segment_forward(model, model.fresh_carry(1), ex.input, /*record=*/false);
  Model<double> m1 = model;
  m1.params = params;
  const auto s2 = supervised_segment(m1, replay.carry, ex.input, ex.target, seg2);
  optimizer_step(params, s2.grads, opt, cfg);

  std::vector<const Mat<double>*> a, b;
  trainer.model().params.for_each([&](ParamGroup, const std::string&, const Mat<double>& m) { a.push_back(&m); });
  params.for_each([&](ParamGroup, const std::string&, const Mat<double>& m) { b.push_back(&m); });
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_LE((*a[k] - *b[k]).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(trainer.state().slots[0].segment, 1);  // halted at M_max and reloaded
}

TEST(Trainer, NeverExceedsMaxSegments) {
  ModelConfig cfg = testing::tiny_config(5);
  cfg.batch_size = 4;
  cfg.max_segments = 3;
  cfg.explore_prob = 0.5;
  const auto data = toy_data(cfg, 10, 2);
  Trainer<float> trainer(Model<float>::create(cfg), data);
  for (int s = 0; s < 40; ++s) {
    const auto m = trainer.step();
    EXPECT_LE(m.mean_segments, 3.0);
    for (const auto& slot : trainer.state().slots) {
      EXPECT_GE(slot.segment, 1);
      EXPECT_LE(slot.segment, 3);
      EXPECT_LE(slot.min_segments, 3);
    }
  }
  const auto r = evaluate(trainer.model(), data, 3);
  EXPECT_LE(r.mean_segments, 3.0);
  for (const auto& p : r.predictions) EXPECT_LE(p.segments, 3);
  EXPECT_EQ(evaluate(trainer.model(), data, 1).mean_segments, 1.0);
}

TEST(Trainer, FixedSegmentModelRunsExactlyM) {
  ModelConfig cfg = testing::tiny_config(6);
  cfg.act = false;
  cfg.max_segments = 3;
  const auto data = toy_data(cfg, 5, 3);
  Trainer<float> trainer(Model<float>::create(cfg), data);
  for (int s = 0; s < 6; ++s) trainer.step();
  EXPECT_EQ(evaluate(trainer.model(), data, 3).mean_segments, 3.0);
  EXPECT_EQ(evaluate(trainer.model(), data, 5).mean_segments, 5.0);
}

TEST(Trainer, DeterministicAndResumable) {
  ModelConfig cfg = testing::tiny_config(8);
  const auto data = toy_data(cfg, 6, 4);
  Trainer<float> a(Model<float>::create(cfg), data);
  Trainer<float> b(Model<float>::create(cfg), data);
  for (int s = 0; s < 5; ++s) EXPECT_EQ(to_json(a.step()).dump(), to_json(b.step()).dump());
  Trainer<float> c(a.model(), data, a.state());
  for (int s = 0; s < 5; ++s) EXPECT_EQ(to_json(a.step()).dump(), to_json(c.step()).dump());
}

TEST(Trainer, RejectsMismatchedData) {
  ModelConfig cfg = testing::tiny_config();
  auto data = toy_data(cfg, 2, 1);
  data[1].input.push_back(1);
  data[1].target.push_back(1);
  EXPECT_THROW(Trainer<float>(Model<float>::create(cfg), data), InputError);
  EXPECT_THROW(Trainer<float>(Model<float>::create(cfg), {}), InputError);
}

TEST(Trainer, LearnsToyMapping) {
  ModelConfig cfg = testing::tiny_config(10);
  cfg.hidden_dim = 32;
  cfg.n_heads = 4;
  cfg.lr = 3e-3;
  cfg.warmup_steps = 10;
  cfg.batch_size = 4;
  const auto data = toy_data(cfg, 4, 5);
  Trainer<float> trainer(Model<float>::create(cfg), data);
  double first = 0.0, last = 0.0;
  for (int s = 0; s < 200; ++s) {
    const auto m = trainer.step();
    if (s == 0) first = m.seq_loss;
    last = m.seq_loss;
  }
  EXPECT_LT(last, 0.5 * first);
}

}  // namespace
}  // namespace hrm
