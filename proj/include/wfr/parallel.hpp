#pragma once

#include <cstddef>
#include <functional>

namespace wfr {

/// Worker count: WFR_THREADS if set to a positive integer, else the hardware
/// concurrency, never below 1.
unsigned thread_count();

/// Runs body(i) for i in [0, n) over contiguous chunks. Each index is handled
/// by exactly one worker, so writes to distinct slots need no locking.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace wfr
