#pragma once

#include <cstddef>
#include <functional>

namespace funnel {

// Worker count used by parallel_for. Defaults to the FUNNEL_THREADS
// environment variable, or hardware concurrency when unset.
std::size_t thread_count();
void set_thread_count(std::size_t n);

// Runs body(i) for i in [0, n). Each index is handled exactly once; callers
// write results into per-index slots so output never depends on scheduling.
// Nested calls from inside a worker run serially.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace funnel
