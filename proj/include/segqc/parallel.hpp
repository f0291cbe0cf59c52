#pragma once

#include <cstddef>
#include <functional>

namespace segqc {

/// Worker count: SEGQC_THREADS if set to a positive integer, otherwise the
/// hardware concurrency (at least 1).
unsigned thread_count();

/// Calls fn(i) for i in [0, n) across up to thread_count() threads. Indices are
/// claimed in increasing order, so the exception from the lowest failing index
/// is the one rethrown on the calling thread, after all workers have stopped.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace segqc
