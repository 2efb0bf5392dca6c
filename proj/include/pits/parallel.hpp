#pragma once

#include <cstddef>
#include <functional>

namespace pits {

// Calls fn(i) for i in [0, n) on up to `threads` workers using contiguous
// chunks. Callers write results to per-index slots and reduce them in index
// order afterwards, so output does not depend on the thread count.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

// Process-wide default used when a caller passes threads = 0.
void set_default_threads(std::size_t threads);
std::size_t default_threads();

}  // namespace pits
