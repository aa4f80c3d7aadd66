#pragma once

#include <cstddef>
#include <functional>

namespace markovcp {

/// Resolves a worker count: values < 1 mean "use the hardware concurrency".
int resolve_threads(int requested) noexcept;

/// Runs fn(0..count-1) across `threads` workers. Indices are claimed
/// dynamically, so callers must make fn's effect depend only on its index;
/// under that contract results are identical for any worker count. The first
/// exception thrown by any worker is rethrown after all workers finish.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace markovcp
