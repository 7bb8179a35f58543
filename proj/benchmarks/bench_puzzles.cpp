#include <benchmark/benchmark.h>

#include <Eigen/Dense>

#include "hrm/analysis.hpp"
#include "hrm/maze.hpp"
#include "hrm/sudoku.hpp"

namespace {

void BM_SudokuSolve(benchmark::State& state) {
  hrm::Rng rng(3);
  std::vector<hrm::SudokuPuzzle> puzzles;
  for (int i = 0; i < 16; ++i) puzzles.push_back(hrm::sudoku_generate({0, 100000}, rng));
  std::size_t i = 0;
  for (auto _ : state) {
    auto r = hrm::sudoku_solve(puzzles[i++ % puzzles.size()].givens);
    benchmark::DoNotOptimize(r.backtracks);
  }
}
BENCHMARK(BM_SudokuSolve);

void BM_SudokuGenerate(benchmark::State& state) {
  hrm::Rng rng(4);
  for (auto _ : state) benchmark::DoNotOptimize(hrm::sudoku_generate({0, 100000}, rng).difficulty);
}
BENCHMARK(BM_SudokuGenerate)->Unit(benchmark::kMillisecond);

void BM_MazeGenerate(benchmark::State& state) {
  hrm::Rng rng(5);
  for (auto _ : state) benchmark::DoNotOptimize(hrm::maze_generate(rng).difficulty);
}
BENCHMARK(BM_MazeGenerate)->Unit(benchmark::kMillisecond);

void BM_ParticipationRatio(benchmark::State& state) {
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(state.range(0), state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(hrm::participation_ratio(x));
}
BENCHMARK(BM_ParticipationRatio)->Args({200, 10368})->Args({2000, 128})->Unit(benchmark::kMillisecond);

}  // namespace
