#pragma once

#include <cstddef>
#include <functional>

namespace alphaadv {

/// Worker threads to use: hardware concurrency, capped by ALPHAADV_THREADS when set.
std::size_t worker_count();

/// Runs fn(0) .. fn(n-1), possibly concurrently. Tasks must write to
/// disjoint outputs. The first exception thrown by any task is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

} // namespace alphaadv
