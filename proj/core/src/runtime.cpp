#include "hrm/runtime.hpp"

#include <malloc.h>

#include <algorithm>
#include <cstdlib>
#include <string>
#include <thread>

namespace hrm {

void tune_allocator() {
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  mallopt(M_TOP_PAD, 64 << 20);
}

int worker_threads() {
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("HRM_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n >= 1) return std::min<int>(n, static_cast<int>(hw) * 4);
    } catch (...) {
    }
  }
  return static_cast<int>(hw);
}

}  // namespace hrm
