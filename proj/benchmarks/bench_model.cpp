#include <benchmark/benchmark.h>

#include "hrm/training.hpp"

namespace {

hrm::ModelConfig bench_config(int d) {
  hrm::ModelConfig c;
  c.hidden_dim = d;
  c.n_heads = 4;
  c.blocks_per_module = 2;
  c.max_segments = 4;
  return c;
}

std::vector<int> tokens_for(const hrm::ModelConfig& c, int batch) {
  hrm::Rng rng(1);
  std::vector<int> t(static_cast<std::size_t>(batch * c.seq_len));
  for (auto& v : t) v = rng.uniform_int(1, c.vocab_size - 1);
  return t;
}

void BM_SegmentForward(benchmark::State& state) {
  const auto cfg = bench_config(static_cast<int>(state.range(0)));
  const auto m = hrm::Model<float>::create(cfg);
  const auto tokens = tokens_for(cfg, 1);
  const auto carry = m.fresh_carry(1);
  for (auto _ : state) {
    auto r = hrm::segment_forward(m, carry, tokens, /*record=*/false);
    benchmark::DoNotOptimize(r.logits.data());
  }
}
BENCHMARK(BM_SegmentForward)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

// One optimizer-free training segment: forward, lookahead and backward.
void BM_SupervisedSegment(benchmark::State& state) {
  const auto cfg = bench_config(static_cast<int>(state.range(0)));
  const auto m = hrm::Model<float>::create(cfg);
  const int batch = static_cast<int>(state.range(1));
  const auto tokens = tokens_for(cfg, batch);
  const std::vector<int> segments(static_cast<std::size_t>(batch), 1);
  const auto carry = m.fresh_carry(batch);
  for (auto _ : state) {
    auto r = hrm::supervised_segment(m, carry, tokens, tokens, segments);
    benchmark::DoNotOptimize(r.loss);
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_SupervisedSegment)->Args({64, 8})->Args({128, 8})->Unit(benchmark::kMillisecond);

}  // namespace
