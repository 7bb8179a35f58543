#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>

namespace hrm {

// Deterministic random source. All distributions are implemented here on
// top of the raw engine so results do not depend on the standard library's
// distribution implementations, and the engine state alone is the cursor.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  // Uniform in [0, 1).
  double uniform();
  // Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);
  // Uniform integer in [lo, hi].
  int uniform_int(int lo, int hi);
  double normal();
  // Normal(0, stddev) resampled until it lies within +-bound*stddev.
  double truncated_normal(double stddev, double bound = 2.0);

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[below(i)]);
    }
  }

  std::string state() const;
  void set_state(const std::string& s);

 private:
  std::mt19937_64 engine_;
};

// Derive an independent seed for a named sub-stream.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace hrm
