#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "hrm/errors.hpp"
#include "hrm/model.hpp"
#include "test_support.hpp"

namespace hrm {
namespace {

using Md = Mat<double>;

Md random_mat(Rng& rng, int r, int c, double scale = 1.0) {
  Md m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

// Variance of N(0,1) conditioned on |x| <= b.
double truncated_variance(double b) {
  const double phi = std::exp(-0.5 * b * b) / std::sqrt(2.0 * std::numbers::pi);
  const double mass = std::erf(b / std::sqrt(2.0));
  return 1.0 - 2.0 * b * phi / mass;
}

TEST(TruncatedNormal, MonteCarloMomentsAndSupport) {
  Rng rng(11);
  const int n = 200000;
  double sum = 0.0, sq = 0.0, worst = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.truncated_normal(1.0);
    sum += x;
    sq += x * x;
    worst = std::max(worst, std::abs(x));
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  EXPECT_LE(worst, 2.0);
  EXPECT_NEAR(mean, 0.0, 0.01);
  EXPECT_NEAR(var, truncated_variance(2.0), 0.01);
}

TEST(TruncatedNormal, ScalesWithStddev) {
  Rng rng(3);
  for (int i = 0; i < 10000; ++i) EXPECT_LE(std::abs(rng.truncated_normal(0.25)), 0.5);
}

TEST(LecunInit, EmpiricalStdMatchesFanIn) {
  Rng rng(5);
  const Md w = lecun_matrix<double>(256, 256, rng);
  const double var = w.squaredNorm() / static_cast<double>(w.size());
  EXPECT_NEAR(var, truncated_variance(2.0) / 256.0, 0.03 / 256.0);
  EXPECT_LE(w.cwiseAbs().maxCoeff(), 2.0 / 16.0 + 1e-12);
}

TEST(Rng, StateRoundTrip) {
  Rng a(99);
  for (int i = 0; i < 17; ++i) a.next_u64();
  Rng b;
  b.set_state(a.state());
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(RmsNorm, RowsHaveUnitRms) {
  Rng rng(1);
  const Md x = random_mat(rng, 6, 32, 3.0);
  const Md y = rms_norm<double>(x, 1e-12);
  for (Eigen::Index r = 0; r < y.rows(); ++r) EXPECT_NEAR(y.row(r).squaredNorm() / 32.0, 1.0, 1e-9);
}

TEST(Rope, ScoresDependOnlyOnRelativeOffset) {
  const int S = 12, heads = 2, hd = 8;
  RopeTable<double> rope(S, hd, 10000.0);
  LayerShape<double> shape{S, heads, 1e-6, &rope};
  Rng rng(2);
  const Md q1 = random_mat(rng, 1, heads * hd);
  const Md k1 = random_mat(rng, 1, heads * hd);
  Md q = q1.replicate(S, 1);
  Md k = k1.replicate(S, 1);
  apply_rope(q, shape);
  apply_rope(k, shape);
  for (int delta = 0; delta < 4; ++delta) {
    for (int h = 0; h < heads; ++h) {
      const double ref = q.row(0).segment(h * hd, hd).dot(k.row(delta).segment(h * hd, hd));
      for (int p = 1; p + delta < S; ++p) {
        EXPECT_NEAR(q.row(p).segment(h * hd, hd).dot(k.row(p + delta).segment(h * hd, hd)), ref, 1e-10);
      }
    }
  }
}

TEST(Rope, InverseRestoresInput) {
  RopeTable<double> rope(5, 4, 10000.0);
  LayerShape<double> shape{5, 1, 1e-6, &rope};
  Rng rng(4);
  const Md x = random_mat(rng, 10, 4);
  Md y = x;
  apply_rope(y, shape);
  apply_rope(y, shape, /*inverse=*/true);
  EXPECT_LT((y - x).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Stablemax, ValuesAndNormalization) {
  EXPECT_DOUBLE_EQ(stablemax_s(0.0), 1.0);
  EXPECT_DOUBLE_EQ(stablemax_s(2.0), 3.0);
  EXPECT_DOUBLE_EQ(stablemax_s(-1.0), 0.5);
  Vec<double> v(4);
  v << -3.0, 0.5, 2.0, -0.1;
  const Vec<double> p = stablemax(v);
  EXPECT_NEAR(p.sum(), 1.0, 1e-12);
  Eigen::Index a = 0, b = 0;
  p.maxCoeff(&a);
  softmax(v).maxCoeff(&b);
  EXPECT_EQ(a, b);
}

TEST(Embedding, ScaledLookupAndRangeCheck) {
  Rng rng(8);
  const Md table = random_mat(rng, 5, 16);
  const std::vector<int> tokens{4, 0, 2};
  const Md x = embed_input<double>(tokens, table);
  EXPECT_LT((x.row(0) - 4.0 * table.row(4)).cwiseAbs().maxCoeff(), 1e-12);
  const std::vector<int> bad{5};
  EXPECT_THROW(embed_input<double>(bad, table), InputError);
}

TEST(ModuleForward, SumsInputsBeforeTheStack) {
  ModelConfig cfg = testing::tiny_config();
  Rng rng(9);
  const auto params = init_params<double>(cfg, rng);
  RopeTable<double> rope(cfg.seq_len, cfg.head_dim(), cfg.rope_base);
  const auto shape = layer_shape(cfg, rope);
  const Md a = random_mat(rng, 8, 16), b = random_mat(rng, 8, 16), c = random_mat(rng, 8, 16);
  const Md merged = module_forward<double>({&a, &b, &c}, params.low, shape);
  const Md direct = stack_forward<double>(a + b + c, params.low, shape);
  EXPECT_LT((merged - direct).cwiseAbs().maxCoeff(), 1e-12);
  const Md wrong = random_mat(rng, 7, 16);
  EXPECT_THROW((module_forward<double>({&a, &wrong}, params.low, shape)), InputError);
}

TEST(Attention, IsNonCausal) {
  ModelConfig cfg = testing::tiny_config();
  Rng rng(10);
  const auto params = init_params<double>(cfg, rng);
  RopeTable<double> rope(cfg.seq_len, cfg.head_dim(), cfg.rope_base);
  const auto shape = layer_shape(cfg, rope);
  Md x = random_mat(rng, 8, 16);
  const Md y0 = attention_forward<double>(x, params.low[0], shape);
  x.row(7) *= -2.0;
  const Md y1 = attention_forward<double>(x, params.low[0], shape);
  EXPECT_GT((y0.row(0) - y1.row(0)).norm(), 1e-6);
}

// Central differences of <dy, block(x)> against block_backward.
TEST(Block, BackwardMatchesFiniteDifferences) {
  ModelConfig cfg = testing::tiny_config();
  Rng rng(12);
  auto params = init_params<double>(cfg, rng);
  RopeTable<double> rope(cfg.seq_len, cfg.head_dim(), cfg.rope_base);
  const auto shape = layer_shape(cfg, rope);
  const Md x = random_mat(rng, 16, 16);  // two sequences
  const Md dy = random_mat(rng, 16, 16);
  BlockWeights<double>& w = params.low[0];
  BlockCache<double> cache;
  block_forward<double>(x, w, shape, &cache);
  auto grad = BlockWeights<double>::zeros(16, cfg.inner_dim());
  const Md dx = block_backward<double>(cache, w, shape, dy, grad);
  auto objective = [&](const Md& in) { return block_forward<double>(in, w, shape).cwiseProduct(dy).sum(); };

  const double h = 1e-6;
  double worst = 0.0;
  Md xp = x;
  for (Eigen::Index i = 0; i < x.size(); i += 7) {
    const double o = xp.data()[i];
    xp.data()[i] = o + h;
    const double up = objective(xp);
    xp.data()[i] = o - h;
    const double down = objective(xp);
    xp.data()[i] = o;
    worst = std::max(worst, std::abs((up - down) / (2 * h) - dx.data()[i]));
  }
  EXPECT_LT(worst, 1e-6);

  std::vector<Md*> live;
  std::vector<const Md*> analytic;
  w.for_each([&](const char*, Md& m) { live.push_back(&m); });
  grad.for_each([&](const char*, Md& m) { analytic.push_back(&m); });
  for (std::size_t k = 0; k < live.size(); ++k) {
    Md& m = *live[k];
    for (Eigen::Index i = 0; i < m.size(); i += 5) {
      const double o = m.data()[i];
      m.data()[i] = o + h;
      const double up = objective(x);
      m.data()[i] = o - h;
      const double down = objective(x);
      m.data()[i] = o;
      EXPECT_NEAR((up - down) / (2 * h), analytic[k]->data()[i], 1e-6) << "weight " << k << " entry " << i;
    }
  }
}

TEST(Config, ValidationAndJsonRoundTrip) {
  ModelConfig cfg = testing::tiny_config();
  cfg.use_stablemax = true;
  cfg.arch = Arch::kRecurrent;
  const ModelConfig back = config_from_json(nlohmann::json::parse(to_json(cfg).dump()));
  EXPECT_EQ(to_json(back).dump(), to_json(cfg).dump());
  EXPECT_THROW(config_from_json(nlohmann::json{{"hiden_dim", 4}}), ConfigError);
  ModelConfig bad = cfg;
  bad.n_heads = 3;
  EXPECT_THROW(bad.validate(), ConfigError);
  EXPECT_EQ(ModelConfig{}.inner_dim(), 512);
}

TEST(Parameters, CountAndGroups) {
  ModelConfig cfg = testing::tiny_config();
  Rng rng(1);
  const auto p = init_params<double>(cfg, rng);
  const std::size_t block = 4 * 16 * 16 + 3 * 16 * 32;
  EXPECT_EQ(p.count(), 11 * 16 + 2 * block + 16 * 11 + 16 * 2);
  int groups[5] = {};
  p.for_each([&](ParamGroup g, const std::string&, const Md&) { ++groups[static_cast<int>(g)]; });
  EXPECT_EQ(groups[static_cast<int>(ParamGroup::kLow)], 7);
  EXPECT_EQ(groups[static_cast<int>(ParamGroup::kHigh)], 7);
}

}  // namespace
}  // namespace hrm
