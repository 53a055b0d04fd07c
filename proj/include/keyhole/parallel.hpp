#pragma once

#include <cstdint>
#include <functional>

namespace keyhole {

// Global worker count used by all parallel maps. Defaults to the hardware
// concurrency, capped at 8.
void set_thread_count(int n);
int thread_count();

// Runs fn over [0, n) split into contiguous chunks. Chunking depends only on
// n, never on the worker count, so any reduction done per chunk and merged in
// chunk order is bitwise reproducible at any thread count. fn must only write
// state owned by its own index range.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn);

} // namespace keyhole
