#include "hrm/tokenizer.hpp"

#include <array>

#include "hrm/errors.hpp"

namespace hrm {

TokenExample tokenize(const SudokuPuzzle& p) {
  TokenExample ex;
  ex.task = "sudoku";
  ex.input.resize(kSudokuSeqLen);
  ex.target.resize(kSudokuSeqLen);
  for (int i = 0; i < kSudokuSeqLen; ++i) {
    if (p.givens[i] > 9 || p.solution[i] > 9) throw InputError("sudoku digit out of range");
    ex.input[i] = p.givens[i] + 1;
    ex.target[i] = p.solution[i] + 1;
  }
  ex.difficulty = static_cast<double>(p.difficulty);
  return ex;
}

SudokuGrid detokenize_sudoku(std::span<const int> tokens) {
  if (tokens.size() != kSudokuSeqLen) throw InputError("sudoku token sequence must have 81 entries");
  SudokuGrid g{};
  for (int i = 0; i < kSudokuSeqLen; ++i) {
    const int t = tokens[i];
    g[i] = (t >= 1 && t <= 10) ? static_cast<std::uint8_t>(t - 1) : 0;
  }
  return g;
}

std::vector<int> encode_maze_input(const MazeInstance& m) {
  const MazeGrid& g = m.grid;
  std::vector<int> out(static_cast<std::size_t>(g.rows * g.cols));
  for (int r = 0; r < g.rows; ++r) {
    for (int c = 0; c < g.cols; ++c) out[static_cast<std::size_t>(r * g.cols + c)] = g.is_wall({r, c}) ? kMazeWall : kMazeOpen;
  }
  out[static_cast<std::size_t>(m.start.row * g.cols + m.start.col)] = kMazeStart;
  out[static_cast<std::size_t>(m.goal.row * g.cols + m.goal.col)] = kMazeGoal;
  return out;
}

TokenExample tokenize(const MazeInstance& m) {
  TokenExample ex;
  ex.task = "maze";
  ex.input = encode_maze_input(m);
  ex.target = ex.input;
  for (const Cell& p : m.optimal_path) {
    if (p == m.start || p == m.goal) continue;
    ex.target[static_cast<std::size_t>(p.row * m.grid.cols + p.col)] = kMazePath;
  }
  ex.difficulty = m.difficulty;
  return ex;
}

MazeInstance maze_from_tokens(std::span<const int> input, int side) {
  if (input.size() != static_cast<std::size_t>(side * side)) throw InputError("maze token sequence has wrong length");
  MazeInstance m;
  m.grid = MazeGrid(side, side);
  bool has_start = false;
  bool has_goal = false;
  for (int i = 0; i < side * side; ++i) {
    const Cell p{i / side, i % side};
    switch (input[static_cast<std::size_t>(i)]) {
      case kMazeWall: m.grid.set_wall(p, true); break;
      case kMazeOpen: break;
      case kMazeStart: m.start = p; has_start = true; break;
      case kMazeGoal: m.goal = p; has_goal = true; break;
      default: throw InputError("unexpected token in maze input");
    }
  }
  if (!has_start || !has_goal) throw InputError("maze input lacks start or goal");
  auto path = maze_bfs(m.grid, m.start, m.goal);
  if (path) {
    m.difficulty = static_cast<int>(path->size());
    m.optimal_path = std::move(*path);
  }
  return m;
}

std::optional<std::vector<Cell>> decode_maze_path(std::span<const int> predicted, const MazeInstance& m) {
  const int cols = m.grid.cols;
  if (predicted.size() != static_cast<std::size_t>(m.grid.rows * cols)) return std::nullopt;
  auto marked = [&](Cell p) {
    if (!m.grid.in_bounds(p)) return false;
    if (p == m.start || p == m.goal) return true;
    return predicted[static_cast<std::size_t>(p.row * cols + p.col)] == kMazePath;
  };
  std::size_t total = 0;
  for (int r = 0; r < m.grid.rows; ++r) {
    for (int c = 0; c < cols; ++c) total += marked({r, c}) ? 1 : 0;
  }
  static constexpr std::array<Cell, 4> kSteps{{{-1, 0}, {0, 1}, {1, 0}, {0, -1}}};
  std::vector<bool> seen(static_cast<std::size_t>(m.grid.rows * cols), false);
  std::vector<Cell> walk{m.start};
  seen[static_cast<std::size_t>(m.start.row * cols + m.start.col)] = true;
  Cell cur = m.start;
  while (!(cur == m.goal)) {
    std::optional<Cell> next;
    int options = 0;
    for (const Cell& s : kSteps) {
      const Cell n{cur.row + s.row, cur.col + s.col};
      if (marked(n) && !seen[static_cast<std::size_t>(n.row * cols + n.col)]) {
        ++options;
        next = n;
      }
    }
    if (options != 1) return std::nullopt;
    cur = *next;
    seen[static_cast<std::size_t>(cur.row * cols + cur.col)] = true;
    walk.push_back(cur);
  }
  if (walk.size() != total) return std::nullopt;
  return walk;
}

std::vector<int> encode_arc_grid(const Grid& g, int puzzle_id) {
  if (g.rows < 1 || g.cols < 1 || g.rows > kArcMaxSide || g.cols > kArcMaxSide) {
    throw InputError("ARC grid must be between 1x1 and 30x30");
  }
  std::vector<int> out(kArcSeqLen, kPadToken);
  out[0] = kArcPuzzleBase + puzzle_id;
  for (int r = 0; r < g.rows; ++r) {
    const int base = 1 + r * kArcRowStride;
    for (int c = 0; c < g.cols; ++c) {
      const int v = g.at(r, c);
      if (v < 0 || v >= kArcColors) throw InputError("ARC colour out of range");
      out[static_cast<std::size_t>(base + c)] = kArcColorBase + v;
    }
    out[static_cast<std::size_t>(base + g.cols)] = kArcEor;
  }
  return out;
}

std::optional<Grid> decode_arc_grid(std::span<const int> tokens) {
  if (tokens.size() != kArcSeqLen) return std::nullopt;
  auto is_color = [](int t) { return t >= kArcColorBase && t < kArcColorBase + kArcColors; };
  int cols = 0;
  while (cols < kArcMaxSide && is_color(tokens[static_cast<std::size_t>(1 + cols)])) ++cols;
  if (cols == 0 || tokens[static_cast<std::size_t>(1 + cols)] != kArcEor) return std::nullopt;
  int rows = 0;
  while (rows < kArcMaxSide && is_color(tokens[static_cast<std::size_t>(1 + rows * kArcRowStride)])) ++rows;
  Grid g(rows, cols);
  for (int r = 0; r < rows; ++r) {
    const int base = 1 + r * kArcRowStride;
    for (int c = 0; c < cols; ++c) {
      const int t = tokens[static_cast<std::size_t>(base + c)];
      if (!is_color(t)) return std::nullopt;
      g.at(r, c) = t - kArcColorBase;
    }
    if (tokens[static_cast<std::size_t>(base + cols)] != kArcEor) return std::nullopt;
  }
  return g;
}

TokenExample tokenize(const ArcExample& ex) {
  TokenExample out;
  out.task = "arc";
  out.input = encode_arc_grid(ex.input, ex.puzzle_id);
  out.target = encode_arc_grid(ex.output, ex.puzzle_id);
  out.puzzle_id = ex.puzzle_id;
  return out;
}

}  // namespace hrm
