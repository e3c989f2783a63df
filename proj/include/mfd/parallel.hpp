#pragma once

#include <cstddef>
#include <functional>

namespace mfd {

/// Caps worker threads used by parallel_for. 0 means hardware concurrency.
void set_thread_count(unsigned n);
unsigned thread_count();

/// Runs body(k) for k in [begin, end) split into contiguous chunks. Each k is
/// visited by exactly one worker, so bodies that only write slot k produce
/// identical results for any thread count.
void parallel_for(std::ptrdiff_t begin, std::ptrdiff_t end, const std::function<void(std::ptrdiff_t)>& body);

}  // namespace mfd
