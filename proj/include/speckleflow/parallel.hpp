#pragma once

#include <cstddef>
#include <functional>

namespace speckleflow {

/// Worker count: SPECKLEFLOW_THREADS if set and positive, else the hardware
/// concurrency. Read once per process.
unsigned thread_count();

/// Splits [0, n) into contiguous chunks and runs body(lo, hi) on each. Bodies
/// must only write disjoint output, so results never depend on the split.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace speckleflow
