#include "hrm/arc.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "hrm/errors.hpp"

namespace hrm {
namespace {

Grid rotate_cw(const Grid& g) {
  Grid out(g.cols, g.rows);
  for (int r = 0; r < g.rows; ++r) {
    for (int c = 0; c < g.cols; ++c) out.at(c, g.rows - 1 - r) = g.at(r, c);
  }
  return out;
}

Grid transpose(const Grid& g) {
  Grid out(g.cols, g.rows);
  for (int r = 0; r < g.rows; ++r) {
    for (int c = 0; c < g.cols; ++c) out.at(c, r) = g.at(r, c);
  }
  return out;
}

Grid grid_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.empty()) throw InputError("ARC grid must be a non-empty array of rows");
  Grid g(static_cast<int>(j.size()), static_cast<int>(j[0].size()));
  if (g.rows > kArcMaxSide || g.cols > kArcMaxSide || g.cols == 0) throw InputError("ARC grid exceeds 30x30");
  for (int r = 0; r < g.rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<int>(row.size()) != g.cols) throw InputError("ragged ARC grid");
    for (int c = 0; c < g.cols; ++c) {
      const int v = row[static_cast<std::size_t>(c)].get<int>();
      if (v < 0 || v >= kArcColors) throw InputError("ARC colour out of range");
      g.at(r, c) = v;
    }
  }
  return g;
}

}  // namespace

ArcTransform ArcTransform::random(Rng& rng, bool keep_background, int max_shift) {
  ArcTransform t;
  t.dihedral = rng.uniform_int(0, 7);
  if (keep_background) {
    std::array<int, kArcColors - 1> rest{};
    int n = 0;
    for (int c = 0; c < kArcColors; ++c) {
      if (c != t.background) rest[n++] = c;
    }
    rng.shuffle(std::span<int>(rest));
    n = 0;
    for (int c = 0; c < kArcColors; ++c) t.colors[c] = c == t.background ? c : rest[n++];
  } else {
    rng.shuffle(std::span<int>(t.colors));
  }
  t.shift_rows = rng.uniform_int(0, max_shift);
  t.shift_cols = rng.uniform_int(0, max_shift);
  return t;
}

Grid dihedral_apply(const Grid& g, int k) {
  Grid out = k >= 4 ? transpose(g) : g;
  for (int i = 0; i < k % 4; ++i) out = rotate_cw(out);
  return out;
}

Grid dihedral_invert(const Grid& g, int k) {
  Grid out = g;
  for (int i = 0; i < (4 - k % 4) % 4; ++i) out = rotate_cw(out);
  return k >= 4 ? transpose(out) : out;
}

Grid arc_augment(const Grid& g, const ArcTransform& t) {
  Grid d = dihedral_apply(g, t.dihedral);
  const int rows = d.rows + t.shift_rows;
  const int cols = d.cols + t.shift_cols;
  if (rows > kArcMaxSide || cols > kArcMaxSide) throw InputError("translation pushes grid beyond 30x30");
  Grid out(rows, cols, t.colors[static_cast<std::size_t>(t.background)]);
  for (int r = 0; r < d.rows; ++r) {
    for (int c = 0; c < d.cols; ++c) out.at(r + t.shift_rows, c + t.shift_cols) = t.colors[static_cast<std::size_t>(d.at(r, c))];
  }
  return out;
}

ArcExample arc_augment(const ArcExample& ex, const ArcTransform& t) {
  ArcExample out = ex;
  out.input = arc_augment(ex.input, t);
  out.output = arc_augment(ex.output, t);
  return out;
}

std::optional<Grid> arc_invert(const Grid& g, const ArcTransform& t) {
  if (g.rows <= t.shift_rows || g.cols <= t.shift_cols) return std::nullopt;
  std::array<int, kArcColors> inverse{};
  for (int c = 0; c < kArcColors; ++c) inverse[static_cast<std::size_t>(t.colors[c])] = c;
  Grid cropped(g.rows - t.shift_rows, g.cols - t.shift_cols);
  for (int r = 0; r < cropped.rows; ++r) {
    for (int c = 0; c < cropped.cols; ++c) {
      const int v = g.at(r + t.shift_rows, c + t.shift_cols);
      if (v < 0 || v >= kArcColors) return std::nullopt;
      cropped.at(r, c) = inverse[static_cast<std::size_t>(v)];
    }
  }
  return dihedral_invert(cropped, t.dihedral);
}

std::pair<Grid, Grid> arc_vote(const std::vector<Grid>& predictions) {
  if (predictions.empty()) throw InputError("arc_vote needs at least one prediction");
  std::vector<std::pair<std::size_t, int>> tally;  // (first index, count)
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    auto it = std::find_if(tally.begin(), tally.end(),
                           [&](const auto& e) { return predictions[e.first] == predictions[i]; });
    if (it == tally.end()) {
      tally.emplace_back(i, 1);
    } else {
      ++it->second;
    }
  }
  std::stable_sort(tally.begin(), tally.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  const Grid& first = predictions[tally[0].first];
  const Grid& second = tally.size() > 1 ? predictions[tally[1].first] : first;
  return {first, second};
}

std::vector<ArcTask> load_arc_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw InputError("ARC directory not found: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<ArcTask> tasks;
  for (const auto& file : files) {
    std::ifstream in(file);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw InputError("malformed ARC file " + file.string() + ": " + e.what());
    }
    ArcTask task;
    task.name = file.stem().string();
    for (const auto& pair : j.at("train")) {
      task.train.emplace_back(grid_from_json(pair.at("input")), grid_from_json(pair.at("output")));
    }
    for (const auto& pair : j.at("test")) {
      std::optional<Grid> label;
      if (pair.contains("output")) label = grid_from_json(pair.at("output"));
      task.test.emplace_back(grid_from_json(pair.at("input")), std::move(label));
    }
    tasks.push_back(std::move(task));
  }
  return tasks;
}

}  // namespace hrm
