#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hrm/arc.hpp"
#include "hrm/maze.hpp"
#include "hrm/sudoku.hpp"

namespace hrm {

inline constexpr int kPadToken = 0;

// Sudoku: pad, digits 0..9 -> tokens 1..10; 81 positions.
inline constexpr int kSudokuVocab = 11;
inline constexpr int kSudokuSeqLen = 81;

// Maze: pad, wall, open, start, goal, path; 30x30 positions.
enum MazeToken : int { kMazeWall = 1, kMazeOpen = 2, kMazeStart = 3, kMazeGoal = 4, kMazePath = 5 };
inline constexpr int kMazeVocab = 6;

// ARC: pad, end-of-row, colours 0..9 -> 2..11, puzzle ids from 12. Position 0
// holds the puzzle id; row r occupies positions 1 + 31 r .. 31 r + 31 with an
// end-of-row marker after its last cell.
inline constexpr int kArcEor = 1;
inline constexpr int kArcColorBase = 2;
inline constexpr int kArcPuzzleBase = 12;
inline constexpr int kArcRowStride = kArcMaxSide + 1;
inline constexpr int kArcSeqLen = 1 + kArcRowStride * kArcMaxSide;

inline int arc_vocab_size(int n_puzzles) { return kArcPuzzleBase + n_puzzles; }

// A flattened, padded input/target pair as stored in dataset files.
struct TokenExample {
  std::string task;
  std::vector<int> input;
  std::vector<int> target;
  std::optional<int> puzzle_id;
  std::optional<double> difficulty;
};

TokenExample tokenize(const SudokuPuzzle& p);
// Non-digit tokens decode to blank (0).
SudokuGrid detokenize_sudoku(std::span<const int> tokens);

TokenExample tokenize(const MazeInstance& m);
std::vector<int> encode_maze_input(const MazeInstance& m);
// Rebuilds the instance (grid, endpoints, BFS optimal path) from input tokens.
MazeInstance maze_from_tokens(std::span<const int> input, int side = 30);
// Ordered walk start -> goal through cells marked as path. nullopt when the
// marked cells do not form a single simple path.
std::optional<std::vector<Cell>> decode_maze_path(std::span<const int> predicted, const MazeInstance& m);

std::vector<int> encode_arc_grid(const Grid& g, int puzzle_id);
// nullopt when the layout is malformed.
std::optional<Grid> decode_arc_grid(std::span<const int> tokens);
TokenExample tokenize(const ArcExample& ex);

}  // namespace hrm
