#ifndef E2E_PARALLEL_HPP
#define E2E_PARALLEL_HPP

#include <cstddef>
#include <functional>

namespace e2e {

// Global worker cap (CLI --workers). 0 selects hardware concurrency.
void set_worker_count(int workers);
int worker_count();

// Runs fn(begin, end) over a contiguous partition of [0, n).
// Each index is owned by exactly one invocation, so results are
// bit-identical for any worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

} // namespace e2e

#endif
