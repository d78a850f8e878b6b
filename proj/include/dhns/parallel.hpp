#pragma once

#include <cstddef>
#include <functional>

namespace dhns {

// Runs fn(i) for i in [0, n) on up to `threads` threads, contiguous chunks per
// thread. fn must only write to per-index state.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

// --threads if positive, else DHNS_THREADS, else 1.
int resolve_threads(int requested);

}  // namespace dhns
