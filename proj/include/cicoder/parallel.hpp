#pragma once

#include <cstddef>
#include <functional>

namespace cicoder {

// Worker count: CICODER_THREADS if set to a positive integer, otherwise the
// hardware concurrency (at least 1).
std::size_t thread_count();

// Runs body(i) for i in [0, n) across thread_count() workers. Each index is
// processed exactly once; if any call throws, the exception from the lowest
// failing index is rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace cicoder
