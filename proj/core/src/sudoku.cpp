#include "hrm/sudoku.hpp"

#include <algorithm>
#include <bit>
#include <numeric>
#include <vector>

#include "hrm/errors.hpp"

namespace hrm {
namespace {

constexpr std::uint16_t kAll = 0x3FE;  // bits 1..9

struct Units {
  std::array<std::array<int, 9>, 27> units{};
  std::array<std::array<int, 20>, 81> peers{};

  Units() {
    for (int i = 0; i < 9; ++i) {
      for (int j = 0; j < 9; ++j) {
        units[i][j] = i * 9 + j;                                     // rows
        units[9 + i][j] = j * 9 + i;                                 // columns
        units[18 + i][j] = ((i / 3) * 3 + j / 3) * 9 + (i % 3) * 3 + j % 3;  // boxes
      }
    }
    for (int c = 0; c < 81; ++c) {
      int n = 0;
      for (int o = 0; o < 81; ++o) {
        if (o == c) continue;
        const bool same_row = o / 9 == c / 9;
        const bool same_col = o % 9 == c % 9;
        const bool same_box = (o / 27 == c / 27) && ((o % 9) / 3 == (c % 9) / 3);
        if (same_row || same_col || same_box) peers[c][n++] = o;
      }
    }
  }
};

const Units& units() {
  static const Units u;
  return u;
}

using Cands = std::array<std::uint16_t, 81>;

// Runs singles to a fixpoint. Returns false on contradiction.
bool propagate(Cands& c) {
  const Units& u = units();
  std::array<bool, 81> placed{};
  bool changed = true;
  while (changed) {
    changed = false;
    for (int cell = 0; cell < 81; ++cell) {
      if (c[cell] == 0) return false;
      if (!placed[cell] && std::has_single_bit(c[cell])) {
        placed[cell] = true;
        for (int p : u.peers[cell]) {
          if (c[p] & c[cell]) {
            c[p] &= static_cast<std::uint16_t>(~c[cell]);
            if (c[p] == 0) return false;
            changed = true;
          }
        }
      }
    }
    for (const auto& unit : u.units) {
      for (int d = 1; d <= 9; ++d) {
        const std::uint16_t bit = static_cast<std::uint16_t>(1u << d);
        int where = -1;
        int count = 0;
        for (int cell : unit) {
          if (c[cell] & bit) {
            ++count;
            where = cell;
          }
        }
        if (count == 0) return false;
        if (count == 1 && c[where] != bit) {
          c[where] = bit;
          changed = true;
        }
      }
    }
  }
  return true;
}

struct Search {
  int limit = 1;
  long backtracks = 0;
  int found = 0;
  std::optional<SudokuGrid> first;
  Rng* rng = nullptr;

  // Returns true when the search should stop.
  bool run(Cands c) {
    if (!propagate(c)) return false;
    int best = -1;
    int best_count = 10;
    for (int cell = 0; cell < 81; ++cell) {
      const int n = std::popcount(c[cell]);
      if (n > 1 && n < best_count) {
        best = cell;
        best_count = n;
      }
    }
    if (best < 0) {
      if (!first) {
        SudokuGrid g{};
        for (int cell = 0; cell < 81; ++cell) g[cell] = static_cast<std::uint8_t>(std::countr_zero(c[cell]));
        first = g;
      }
      return ++found >= limit;
    }
    std::array<int, 9> digits{};
    int n = 0;
    for (int d = 1; d <= 9; ++d) {
      if (c[best] & (1u << d)) digits[n++] = d;
    }
    if (rng) rng->shuffle(std::span<int>(digits.data(), static_cast<std::size_t>(n)));
    for (int i = 0; i < n; ++i) {
      Cands next = c;
      next[best] = static_cast<std::uint16_t>(1u << digits[i]);
      if (run(next)) return true;
      ++backtracks;
    }
    return false;
  }
};

Cands candidates_from(const SudokuGrid& g, bool& ok) {
  Cands c;
  ok = true;
  for (int cell = 0; cell < 81; ++cell) {
    if (g[cell] > 9) {
      ok = false;
      c[cell] = 0;
    } else {
      c[cell] = g[cell] == 0 ? kAll : static_cast<std::uint16_t>(1u << g[cell]);
    }
  }
  return c;
}

}  // namespace

SudokuSolveResult sudoku_solve(const SudokuGrid& givens, int count_up_to) {
  bool ok = false;
  Cands c = candidates_from(givens, ok);
  SudokuSolveResult r;
  if (!ok) return r;
  Search s;
  s.limit = std::max(1, count_up_to);
  s.run(c);
  r.solution = s.first;
  r.backtracks = s.backtracks;
  r.solutions_found = s.found;
  return r;
}

bool sudoku_is_unique(const SudokuGrid& givens) {
  return sudoku_solve(givens, 2).solutions_found == 1;
}

bool sudoku_is_valid_solution(const SudokuGrid& grid) {
  for (const auto& unit : units().units) {
    std::uint16_t seen = 0;
    for (int cell : unit) {
      if (grid[cell] < 1 || grid[cell] > 9) return false;
      seen |= static_cast<std::uint16_t>(1u << grid[cell]);
    }
    if (seen != kAll) return false;
  }
  return true;
}

std::array<std::uint8_t, 81> sudoku_violations(const SudokuGrid& grid) {
  std::array<std::uint8_t, 81> mask{};
  const Units& u = units();
  for (int cell = 0; cell < 81; ++cell) {
    if (grid[cell] == 0) continue;
    for (int p : u.peers[cell]) {
      if (grid[p] == grid[cell]) {
        mask[cell] = 1;
        break;
      }
    }
  }
  return mask;
}

SudokuGrid sudoku_random_full_grid(Rng& rng) {
  Cands c;
  c.fill(kAll);
  Search s;
  s.rng = &rng;
  s.run(c);
  return *s.first;
}

SudokuPuzzle sudoku_generate(const DifficultyBand& band, Rng& rng, int max_attempts) {
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    SudokuPuzzle p;
    p.solution = sudoku_random_full_grid(rng);
    p.givens = p.solution;
    std::array<int, 81> order{};
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(std::span<int>(order));
    for (int cell : order) {
      SudokuGrid trial = p.givens;
      trial[cell] = 0;
      const auto counted = sudoku_solve(trial, 2);
      if (counted.solutions_found != 1) continue;
      if (sudoku_solve(trial).backtracks > band.max_backtracks) continue;
      p.givens = trial;
    }
    p.difficulty = sudoku_solve(p.givens).backtracks;
    if (p.difficulty >= band.min_backtracks && p.difficulty <= band.max_backtracks) return p;
  }
  throw GenerationError("sudoku difficulty band unreachable within retry budget", 0);
}

SudokuTransform SudokuTransform::identity() {
  SudokuTransform t;
  for (int i = 0; i < 10; ++i) t.digits[i] = static_cast<std::uint8_t>(i);
  for (int i = 0; i < 9; ++i) t.rows[i] = t.cols[i] = static_cast<std::uint8_t>(i);
  return t;
}

SudokuTransform SudokuTransform::random(Rng& rng) {
  SudokuTransform t = identity();
  auto line_perm = [&](std::array<std::uint8_t, 9>& out) {
    std::array<int, 3> groups{0, 1, 2};
    rng.shuffle(std::span<int>(groups));
    for (int g = 0; g < 3; ++g) {
      std::array<int, 3> within{0, 1, 2};
      rng.shuffle(std::span<int>(within));
      for (int k = 0; k < 3; ++k) out[g * 3 + k] = static_cast<std::uint8_t>(groups[g] * 3 + within[k]);
    }
  };
  line_perm(t.rows);
  line_perm(t.cols);
  std::array<std::uint8_t, 9> digits{1, 2, 3, 4, 5, 6, 7, 8, 9};
  rng.shuffle(std::span<std::uint8_t>(digits));
  for (int i = 0; i < 9; ++i) t.digits[i + 1] = digits[i];
  return t;
}

SudokuGrid sudoku_apply(const SudokuGrid& grid, const SudokuTransform& t) {
  SudokuGrid out{};
  for (int r = 0; r < 9; ++r) {
    for (int c = 0; c < 9; ++c) out[r * 9 + c] = t.digits[grid[t.rows[r] * 9 + t.cols[c]]];
  }
  return out;
}

SudokuPuzzle sudoku_augment(const SudokuPuzzle& puzzle, const SudokuTransform& t) {
  SudokuPuzzle out = puzzle;
  out.givens = sudoku_apply(puzzle.givens, t);
  out.solution = sudoku_apply(puzzle.solution, t);
  return out;
}

SudokuPuzzle sudoku_augment(const SudokuPuzzle& puzzle, Rng& rng) {
  return sudoku_augment(puzzle, SudokuTransform::random(rng));
}

std::string sudoku_canonical_key(const SudokuGrid& g) {
  // The first row of any arrangement relabels to 1..9, so for each choice of
  // leading row and column permutation the best row order is found greedily:
  // the other two rows of the leading band sorted, then the remaining bands
  // ordered by their sorted-row strings.
  std::array<std::array<std::uint8_t, 9>, 1296> col_perms{};
  {
    int n = 0;
    std::array<int, 3> stacks{0, 1, 2};
    do {
      std::array<int, 3> a{0, 1, 2};
      do {
        std::array<int, 3> b{0, 1, 2};
        do {
          std::array<int, 3> c{0, 1, 2};
          do {
            const std::array<std::array<int, 3>, 3> within{a, b, c};
            for (int s = 0; s < 3; ++s) {
              for (int k = 0; k < 3; ++k) col_perms[n][s * 3 + k] = static_cast<std::uint8_t>(stacks[s] * 3 + within[s][k]);
            }
            ++n;
          } while (std::next_permutation(c.begin(), c.end()));
        } while (std::next_permutation(b.begin(), b.end()));
      } while (std::next_permutation(a.begin(), a.end()));
    } while (std::next_permutation(stacks.begin(), stacks.end()));
  }

  std::string best;
  using Row = std::array<std::uint8_t, 9>;
  std::array<Row, 9> rows{};
  for (int lead = 0; lead < 9; ++lead) {
    const int lead_band = lead / 3;
    for (const auto& perm : col_perms) {
      std::array<std::uint8_t, 10> relabel{};
      for (int c = 0; c < 9; ++c) relabel[g[lead * 9 + perm[c]]] = static_cast<std::uint8_t>(c + 1);
      for (int r = 0; r < 9; ++r) {
        for (int c = 0; c < 9; ++c) rows[r][c] = relabel[g[r * 9 + perm[c]]];
      }
      std::string key;
      key.reserve(81);
      auto append = [&](const Row& row) {
        for (auto v : row) key.push_back(static_cast<char>('0' + v));
      };
      append(rows[lead]);
      std::array<Row, 2> rest{};
      int k = 0;
      for (int r = lead_band * 3; r < lead_band * 3 + 3; ++r) {
        if (r != lead) rest[k++] = rows[r];
      }
      std::sort(rest.begin(), rest.end());
      append(rest[0]);
      append(rest[1]);
      std::array<std::array<Row, 3>, 2> bands{};
      k = 0;
      for (int band = 0; band < 3; ++band) {
        if (band == lead_band) continue;
        for (int j = 0; j < 3; ++j) bands[k][j] = rows[band * 3 + j];
        std::sort(bands[k].begin(), bands[k].end());
        ++k;
      }
      if (bands[1] < bands[0]) std::swap(bands[0], bands[1]);
      for (const auto& band : bands) {
        for (const auto& row : band) append(row);
      }
      if (best.empty() || key < best) best = std::move(key);
    }
  }
  return best;
}

std::string sudoku_to_string(const SudokuGrid& grid) {
  std::string s(81, '0');
  for (int i = 0; i < 81; ++i) s[i] = static_cast<char>('0' + grid[i]);
  return s;
}

SudokuGrid sudoku_from_string(const std::string& s) {
  if (s.size() != 81) throw InputError("sudoku string must have 81 characters");
  SudokuGrid g{};
  for (int i = 0; i < 81; ++i) {
    const char ch = s[i];
    if (ch == '.' || ch == '0') {
      g[i] = 0;
    } else if (ch >= '1' && ch <= '9') {
      g[i] = static_cast<std::uint8_t>(ch - '0');
    } else {
      throw InputError("invalid sudoku character");
    }
  }
  return g;
}

}  // namespace hrm
