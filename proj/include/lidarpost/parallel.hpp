#pragma once

#include <cstddef>
#include <functional>

namespace lidarpost {

/// Worker count from LIDARPOST_THREADS (unset or 0 = hardware concurrency).
std::size_t thread_count();

/// Runs fn(i) for i in [0, n). Each index is handled exactly once; callers
/// write results into slot i so output order never depends on scheduling.
/// The first exception thrown by any task is rethrown on the caller.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace lidarpost
