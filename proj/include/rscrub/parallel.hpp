#ifndef RSCRUB_PARALLEL_HPP
#define RSCRUB_PARALLEL_HPP

#include <cstddef>
#include <functional>

namespace rscrub {

// Worker count: RSCRUB_THREADS if set and > 0, otherwise hardware concurrency.
std::size_t thread_count();

// Calls body(i) for i in [0, n). Iterations must be independent. Nested calls
// run sequentially on the calling worker. If any iteration throws, the
// exception from the lowest failing index is rethrown after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace rscrub

#endif  // RSCRUB_PARALLEL_HPP
