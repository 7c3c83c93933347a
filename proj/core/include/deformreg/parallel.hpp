#pragma once

#include <cstddef>
#include <functional>

namespace deformreg {

// Worker cap: DEFORMREG_THREADS if set to a positive integer, otherwise the
// number of logical cores.
std::size_t worker_count();

// Runs fn(i) for i in [0, n). Iterations must write disjoint outputs; the
// result is then independent of the worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace deformreg
