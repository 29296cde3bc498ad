#pragma once

#include <cstddef>
#include <functional>

namespace slf {

/// Worker thread count: hardware concurrency, capped by SLF_THREADS when set.
int worker_threads();

/// Runs fn(begin, end) over contiguous chunks of [0, n). Chunk boundaries
/// depend only on n and the thread count; callers that need bit-identical
/// results across thread counts must make each index's work independent.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace slf
