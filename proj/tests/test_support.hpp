#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hrm/config.hpp"
#include "hrm/rng.hpp"

namespace hrm::testing {

inline ModelConfig tiny_config(std::uint64_t seed = 7) {
  ModelConfig c;
  c.vocab_size = 11;
  c.seq_len = 8;
  c.hidden_dim = 16;
  c.n_heads = 2;
  c.blocks_per_module = 1;
  c.expansion = 2.0;
  c.cycles = 2;
  c.low_steps = 2;
  c.max_segments = 3;
  c.batch_size = 2;
  c.warmup_steps = 0;
  c.seed = seed;
  return c;
}

inline std::vector<int> random_tokens(Rng& rng, std::size_t n, int lo, int hi) {
  std::vector<int> t(n);
  for (auto& v : t) v = static_cast<int>(rng.uniform_int(lo, hi));
  return t;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("hrm_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace hrm::testing
