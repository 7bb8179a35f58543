#pragma once

// Binary checkpoints: an 8-byte magic, a length-prefixed JSON header, then raw
// little-endian float32 tensors in header order. Restoring a trainer state
// continues training bit-exactly.

#include <filesystem>
#include <optional>

#include <nlohmann/json.hpp>

#include "hrm/training.hpp"

namespace hrm {

inline constexpr int kCheckpointFormat = 1;

struct Checkpoint {
  Model<float> model;
  std::optional<TrainerState<float>> trainer;
  nlohmann::ordered_json meta;  // caller-supplied, e.g. dataset path
};

// Written through a temporary file and renamed, so a crash never leaves a
// truncated checkpoint at `path`.
void save_checkpoint(const std::filesystem::path& path, const Model<float>& model,
                     const TrainerState<float>* trainer, const nlohmann::ordered_json& meta = {});

// Throws InputError on a missing, truncated or foreign file.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace hrm
