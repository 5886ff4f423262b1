#pragma once

#include <cstddef>
#include <functional>

namespace infill {

/// Worker count: INFILL_THREADS when set (>= 1), else the hardware count.
std::size_t worker_threads();

/// Runs fn(0..n-1) on up to `threads` workers. Indices are claimed in order;
/// the exception from the lowest failing index is rethrown.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace infill
