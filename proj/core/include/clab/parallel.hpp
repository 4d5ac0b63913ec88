#pragma once

#include <cstddef>
#include <functional>

namespace clab {

// Upper bound on worker threads; 0 means "use hardware concurrency".
void set_max_threads(unsigned n);
unsigned max_threads();

// Runs body(i) for i in [0, n). Each index is visited exactly once and
// results are expected to land in per-index slots, so the outcome does not
// depend on the thread count. The first exception thrown is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace clab
