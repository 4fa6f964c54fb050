#pragma once

#include <cstddef>
#include <functional>

namespace tdcr {

// Worker count from TDCR_THREADS, else the hardware concurrency.
std::size_t worker_count();

// Calls fn(i) for i in [0, n) on up to worker_count() threads. Work items
// must write to disjoint outputs; the first exception is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace tdcr
