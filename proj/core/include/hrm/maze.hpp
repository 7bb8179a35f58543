#pragma once

#include <optional>
#include <vector>

#include "hrm/rng.hpp"

namespace hrm {

struct Cell {
  int row = 0;
  int col = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

struct MazeGrid {
  int rows = 30;
  int cols = 30;
  std::vector<bool> wall;  // row-major

  MazeGrid() = default;
  MazeGrid(int r, int c) : rows(r), cols(c), wall(static_cast<std::size_t>(r * c), false) {}

  bool in_bounds(Cell p) const { return p.row >= 0 && p.row < rows && p.col >= 0 && p.col < cols; }
  bool is_wall(Cell p) const { return wall[static_cast<std::size_t>(p.row * cols + p.col)]; }
  bool open(Cell p) const { return in_bounds(p) && !is_wall(p); }
  void set_wall(Cell p, bool w) { wall[static_cast<std::size_t>(p.row * cols + p.col)] = w; }
};

struct MazeInstance {
  MazeGrid grid;
  Cell start, goal;
  std::vector<Cell> optimal_path;  // start..goal inclusive
  int difficulty = 0;              // path length in cells
};

// 4-neighbour BFS with neighbour order N, E, S, W and parent-pointer
// reconstruction. Returns start..goal inclusive, or nullopt if unreachable.
std::optional<std::vector<Cell>> maze_bfs(const MazeGrid& grid, Cell start, Cell goal);

struct MazeGenOptions {
  int size = 30;
  double min_wall_density = 0.30;
  double max_wall_density = 0.50;
  int min_difficulty = 110;  // retained instances have strictly more path cells
  long max_attempts = 2'000'000;
};

// Rejection sampler over i.i.d. wall placements. Throws GenerationError when
// the attempt budget is exhausted.
MazeInstance maze_generate(Rng& rng, const MazeGenOptions& opts = {});

enum class PathVerdict { kCorrect, kSuboptimal, kInvalid };

const char* to_string(PathVerdict v);

// valid: consecutive cells 4-adjacent, all open, from start to goal.
// correct: valid and as long as the optimal path.
PathVerdict maze_check(const std::vector<Cell>& path, const MazeInstance& instance);

}  // namespace hrm
