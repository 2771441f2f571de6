#pragma once

#include <functional>

namespace c2f {

/// Worker count: `C2F_THREADS` if set and positive, else hardware concurrency.
int thread_count();

/// Runs body(i) for i in [0, count). Iterations must write disjoint memory;
/// results never depend on the thread count.
void parallel_for(int count, const std::function<void(int)>& body);

}  // namespace c2f
