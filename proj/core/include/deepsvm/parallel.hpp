#pragma once

#include <cstddef>
#include <functional>

namespace deepsvm {

/// Worker count used by parallel loops. 0 restores the hardware default.
void set_thread_count(unsigned n);
unsigned thread_count();

/// Runs fn(i) for every i in [0, n) across the worker pool. Each index is
/// executed exactly once; callers own any cross-index reduction, which keeps
/// reductions independent of scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace deepsvm
