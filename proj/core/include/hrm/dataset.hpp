#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hrm/tokenizer.hpp"

namespace hrm {

// One JSON object per line. The first line of a dataset file is a
// {"provenance": {...}} header; example lines use the key order
// task, input, target, puzzle_id, difficulty.
struct Dataset {
  nlohmann::ordered_json provenance = nlohmann::ordered_json::object();
  std::vector<TokenExample> examples;
};

std::string to_jsonl(const TokenExample& ex);
TokenExample example_from_json(const nlohmann::json& j);

void write_dataset(const std::filesystem::path& path, const Dataset& data);
Dataset read_dataset(const std::filesystem::path& path);

// Writes to a sibling temp file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

struct SplitIndices {
  std::vector<std::size_t> train, test;
};

// Groups items by equivalence key and assigns whole groups: round(ratio * G)
// groups (clamped to [1, G-1]) go to train, in an order shuffled by `seed`.
SplitIndices build_split(const std::vector<std::string>& keys, double ratio, std::uint64_t seed);

}  // namespace hrm
