#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>

#include "hrm/rng.hpp"

namespace hrm {

// Row-major 9x9 grid; 0 marks a blank cell.
using SudokuGrid = std::array<std::uint8_t, 81>;

struct SudokuPuzzle {
  SudokuGrid givens{};
  SudokuGrid solution{};
  long difficulty = 0;  // backtracks needed by sudoku_solve
};

struct SudokuSolveResult {
  std::optional<SudokuGrid> solution;
  long backtracks = 0;
  int solutions_found = 0;  // only meaningful with count_up_to > 1
};

// Propagation (naked and hidden singles to a fixpoint) interleaved with DFS
// on a minimum-candidate cell. `backtracks` counts retracted guesses. With
// count_up_to > 1 the search keeps going after the first solution until that
// many solutions are found, which is how uniqueness is checked.
SudokuSolveResult sudoku_solve(const SudokuGrid& givens, int count_up_to = 1);

bool sudoku_is_unique(const SudokuGrid& givens);

// True when every row, column and box holds each of 1..9 exactly once.
bool sudoku_is_valid_solution(const SudokuGrid& grid);

// Cells that share a row/column/box with an equal non-zero digit (1) or not (0).
std::array<std::uint8_t, 81> sudoku_violations(const SudokuGrid& grid);

// Uniformly shuffled complete grid via randomized DFS.
SudokuGrid sudoku_random_full_grid(Rng& rng);

struct DifficultyBand {
  long min_backtracks = 0;
  long max_backtracks = 0;
};

// Removes clues in random order while the puzzle stays unique and within the
// band's upper bound; accepts when the final difficulty reaches the lower
// bound. Throws GenerationError after `max_attempts` rejected grids.
SudokuPuzzle sudoku_generate(const DifficultyBand& band, Rng& rng, int max_attempts = 200);

// new[r][c] = digits[old[rows[r]][cols[c]]], digits[0] = 0.
struct SudokuTransform {
  std::array<std::uint8_t, 10> digits{};
  std::array<std::uint8_t, 9> rows{};
  std::array<std::uint8_t, 9> cols{};

  static SudokuTransform identity();
  // Band/stack order, rows within bands, columns within stacks, digit relabel.
  static SudokuTransform random(Rng& rng);
};

SudokuGrid sudoku_apply(const SudokuGrid& grid, const SudokuTransform& t);
SudokuPuzzle sudoku_augment(const SudokuPuzzle& puzzle, const SudokuTransform& t);
SudokuPuzzle sudoku_augment(const SudokuPuzzle& puzzle, Rng& rng);

// Canonical form of the solution grid under the augmentation group: minimal
// row-major string over band/row/stack/column permutations with digits
// relabeled by first occurrence.
std::string sudoku_canonical_key(const SudokuGrid& solution);
inline std::string sudoku_canonical_key(const SudokuPuzzle& p) {
  return sudoku_canonical_key(p.solution);
}

std::string sudoku_to_string(const SudokuGrid& grid);
SudokuGrid sudoku_from_string(const std::string& s);

}  // namespace hrm
