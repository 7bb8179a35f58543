#include "hrm/maze.hpp"

#include <algorithm>
#include <array>
#include <cstdlib>
#include <deque>

#include "hrm/errors.hpp"

namespace hrm {

std::optional<std::vector<Cell>> maze_bfs(const MazeGrid& grid, Cell start, Cell goal) {
  if (!grid.open(start) || !grid.open(goal)) return std::nullopt;
  static constexpr std::array<Cell, 4> kSteps{{{-1, 0}, {0, 1}, {1, 0}, {0, -1}}};
  const auto index = [&](Cell p) { return static_cast<std::size_t>(p.row * grid.cols + p.col); };
  std::vector<int> parent(static_cast<std::size_t>(grid.rows * grid.cols), -2);
  std::deque<Cell> frontier{start};
  parent[index(start)] = -1;
  while (!frontier.empty()) {
    const Cell cur = frontier.front();
    frontier.pop_front();
    if (cur == goal) break;
    for (const Cell& step : kSteps) {
      const Cell next{cur.row + step.row, cur.col + step.col};
      if (!grid.open(next) || parent[index(next)] != -2) continue;
      parent[index(next)] = static_cast<int>(index(cur));
      frontier.push_back(next);
    }
  }
  if (parent[index(goal)] == -2) return std::nullopt;
  std::vector<Cell> path;
  for (int at = static_cast<int>(index(goal)); at != -1; at = parent[static_cast<std::size_t>(at)]) {
    path.push_back({at / grid.cols, at % grid.cols});
  }
  std::reverse(path.begin(), path.end());
  return path;
}

namespace {

// Step counts from `src` to every cell; -1 where unreachable.
std::vector<int> distances_from(const MazeGrid& grid, Cell src) {
  std::vector<int> dist(static_cast<std::size_t>(grid.rows * grid.cols), -1);
  std::vector<Cell> queue{src};
  dist[static_cast<std::size_t>(src.row * grid.cols + src.col)] = 0;
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const Cell c = queue[head];
    const int d = dist[static_cast<std::size_t>(c.row * grid.cols + c.col)];
    for (const Cell s : {Cell{-1, 0}, Cell{0, 1}, Cell{1, 0}, Cell{0, -1}}) {
      const Cell nb{c.row + s.row, c.col + s.col};
      if (!grid.open(nb)) continue;
      int& slot = dist[static_cast<std::size_t>(nb.row * grid.cols + nb.col)];
      if (slot >= 0) continue;
      slot = d + 1;
      queue.push_back(nb);
    }
  }
  return dist;
}

}  // namespace

MazeInstance maze_generate(Rng& rng, const MazeGenOptions& opts) {
  const int n = opts.size;
  for (long attempt = 0; attempt < opts.max_attempts; ++attempt) {
    const double density = opts.min_wall_density + (opts.max_wall_density - opts.min_wall_density) * rng.uniform();
    MazeGrid grid(n, n);
    std::vector<Cell> open;
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) {
        const bool w = rng.uniform() < density;
        grid.set_wall({r, c}, w);
        if (!w) open.push_back({r, c});
      }
    }
    if (open.size() < 2) continue;
    // Goal is drawn uniformly among cells whose shortest path from the start
    // is long enough, instead of rejecting random start/goal pairs.
    const Cell start = open[rng.below(open.size())];
    const auto dist = distances_from(grid, start);
    std::vector<Cell> far;
    for (const Cell& p : open) {
      if (dist[static_cast<std::size_t>(p.row * n + p.col)] + 1 > opts.min_difficulty) far.push_back(p);
    }
    if (far.empty()) continue;
    const Cell goal = far[rng.below(far.size())];
    auto path = maze_bfs(grid, start, goal);
    if (!path || static_cast<int>(path->size()) <= opts.min_difficulty) continue;
    MazeInstance m;
    m.grid = std::move(grid);
    m.start = start;
    m.goal = goal;
    m.difficulty = static_cast<int>(path->size());
    m.optimal_path = std::move(*path);
    return m;
  }
  throw GenerationError("maze generation exhausted its attempt budget", 0);
}

const char* to_string(PathVerdict v) {
  switch (v) {
    case PathVerdict::kCorrect: return "correct";
    case PathVerdict::kSuboptimal: return "suboptimal";
    case PathVerdict::kInvalid: return "invalid";
  }
  return "invalid";
}

PathVerdict maze_check(const std::vector<Cell>& path, const MazeInstance& m) {
  if (path.empty() || !(path.front() == m.start) || !(path.back() == m.goal)) return PathVerdict::kInvalid;
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (!m.grid.open(path[i])) return PathVerdict::kInvalid;
    if (i > 0) {
      const int dist = std::abs(path[i].row - path[i - 1].row) + std::abs(path[i].col - path[i - 1].col);
      if (dist != 1) return PathVerdict::kInvalid;
    }
  }
  return path.size() == m.optimal_path.size() ? PathVerdict::kCorrect : PathVerdict::kSuboptimal;
}

}  // namespace hrm
