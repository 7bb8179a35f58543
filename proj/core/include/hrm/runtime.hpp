#pragma once

namespace hrm {

// Keeps large activation buffers on the heap instead of mmap so repeated
// allocations of the same shapes do not page-fault.
void tune_allocator();

// Worker cap from HRM_THREADS (>= 1), else hardware concurrency.
int worker_threads();

}  // namespace hrm
