#pragma once

#include <functional>

namespace tenstream {

// Worker cap for independent tasks (repetitions, replicas, experiments).
// Defaults to TENSTREAM_THREADS if set, else the hardware concurrency.
int thread_limit();
void set_thread_limit(int n);

// Runs fn(0..n-1), each index exactly once, on up to thread_limit() threads.
// Callers write results into per-index slots so output order never depends
// on scheduling. The first exception thrown by any task is rethrown.
void parallel_for(int n, const std::function<void(int)>& fn);

}  // namespace tenstream
