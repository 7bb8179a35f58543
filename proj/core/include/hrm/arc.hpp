#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hrm/rng.hpp"

namespace hrm {

inline constexpr int kArcMaxSide = 30;
inline constexpr int kArcColors = 10;

struct Grid {
  int rows = 0;
  int cols = 0;
  std::vector<int> cells;  // row-major

  Grid() = default;
  Grid(int r, int c, int fill = 0) : rows(r), cols(c), cells(static_cast<std::size_t>(r * c), fill) {}

  int& at(int r, int c) { return cells[static_cast<std::size_t>(r * cols + c)]; }
  int at(int r, int c) const { return cells[static_cast<std::size_t>(r * cols + c)]; }
  friend bool operator==(const Grid&, const Grid&) = default;
};

enum class ArcRole { kDemonstration, kTest };

struct ArcExample {
  Grid input;
  Grid output;
  int puzzle_id = 0;
  ArcRole role = ArcRole::kDemonstration;
};

// Applied in order: dihedral element, colour permutation, translation.
// Dihedral k: transpose when k >= 4, then rotate k % 4 quarter turns clockwise.
// Translation pads `shift_rows` rows and `shift_cols` columns of background on
// the top/left.
struct ArcTransform {
  int dihedral = 0;
  std::array<int, kArcColors> colors{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  int shift_rows = 0;
  int shift_cols = 0;
  int background = 0;

  static ArcTransform identity() { return {}; }
  // Random element; with keep_background the background colour maps to itself.
  static ArcTransform random(Rng& rng, bool keep_background = true, int max_shift = 4);
};

Grid dihedral_apply(const Grid& g, int k);
Grid dihedral_invert(const Grid& g, int k);

// Throws InputError when the result exceeds 30x30.
Grid arc_augment(const Grid& g, const ArcTransform& t);
ArcExample arc_augment(const ArcExample& ex, const ArcTransform& t);
// Inverse of arc_augment; nullopt when the grid is too small to untranslate
// or holds colours outside the palette.
std::optional<Grid> arc_invert(const Grid& g, const ArcTransform& t);

// Most frequent two grids, ties broken by first occurrence. A single distinct
// grid fills both attempts.
std::pair<Grid, Grid> arc_vote(const std::vector<Grid>& predictions);

struct ArcTask {
  std::string name;
  std::vector<std::pair<Grid, Grid>> train;
  std::vector<std::pair<Grid, std::optional<Grid>>> test;
};

// Reads every *.json task file in `dir` (sorted by filename).
std::vector<ArcTask> load_arc_dir(const std::filesystem::path& dir);

}  // namespace hrm
