#include "hrm/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "hrm/errors.hpp"
#include "hrm/rng.hpp"

namespace hrm {

std::string to_jsonl(const TokenExample& ex) {
  nlohmann::ordered_json j;
  j["task"] = ex.task;
  j["input"] = ex.input;
  j["target"] = ex.target;
  j["puzzle_id"] = ex.puzzle_id ? nlohmann::ordered_json(*ex.puzzle_id) : nlohmann::ordered_json(nullptr);
  j["difficulty"] = ex.difficulty ? nlohmann::ordered_json(*ex.difficulty) : nlohmann::ordered_json(nullptr);
  return j.dump();
}

TokenExample example_from_json(const nlohmann::json& j) {
  TokenExample ex;
  try {
    ex.task = j.at("task").get<std::string>();
    ex.input = j.at("input").get<std::vector<int>>();
    ex.target = j.at("target").get<std::vector<int>>();
    if (j.contains("puzzle_id") && !j.at("puzzle_id").is_null()) ex.puzzle_id = j.at("puzzle_id").get<int>();
    if (j.contains("difficulty") && !j.at("difficulty").is_null()) ex.difficulty = j.at("difficulty").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed dataset record: ") + e.what());
  }
  if (ex.input.size() != ex.target.size()) throw InputError("dataset record input/target length mismatch");
  return ex;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + tmp.string());
    out << contents;
    if (!out) throw InputError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_dataset(const std::filesystem::path& path, const Dataset& data) {
  std::ostringstream os;
  nlohmann::ordered_json header;
  header["provenance"] = data.provenance;
  os << header.dump() << '\n';
  for (const auto& ex : data.examples) os << to_jsonl(ex) << '\n';
  write_file_atomic(path, os.str());
}

Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open dataset " + path.string());
  Dataset data;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::ordered_json j;
    try {
      j = nlohmann::ordered_json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw InputError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (j.contains("provenance")) {
      data.provenance = j.at("provenance");
      continue;
    }
    data.examples.push_back(example_from_json(j));
  }
  return data;
}

SplitIndices build_split(const std::vector<std::string>& keys, double ratio, std::uint64_t seed) {
  std::map<std::string, std::size_t> group_of;
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    auto [it, inserted] = group_of.try_emplace(keys[i], groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(i);
  }
  const std::size_t g = groups.size();
  if (g < 2) throw InputError("build_split needs at least two equivalence groups");
  if (ratio < 0.0 || ratio > 1.0) throw InputError("split ratio must lie in [0,1]");
  std::vector<std::size_t> order(g);
  for (std::size_t i = 0; i < g; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));
  auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(g)));
  n_train = std::clamp<std::size_t>(n_train, 1, g - 1);
  SplitIndices out;
  for (std::size_t k = 0; k < g; ++k) {
    auto& side = k < n_train ? out.train : out.test;
    const auto& members = groups[order[k]];
    side.insert(side.end(), members.begin(), members.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

}  // namespace hrm
