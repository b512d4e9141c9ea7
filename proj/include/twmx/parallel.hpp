#pragma once

#include <cstdint>

namespace twmx {

/// Thread budget for kernels. Reads TWMX_THREADS once (0 or unset = hardware
/// concurrency). Results never depend on this value: every output element is
/// produced by exactly one thread with a fixed accumulation order.
int thread_count();

/// Overrides the budget for the current process (tests, bench).
void set_thread_count(int threads);

template <typename Fn>
void parallel_for(int64_t count, Fn&& fn) {
#if defined(_OPENMP)
    const int threads = thread_count();
    if (threads > 1 && count > 1) {
#pragma omp parallel for schedule(static) num_threads(threads)
        for (int64_t i = 0; i < count; ++i) fn(i);
        return;
    }
#endif
    for (int64_t i = 0; i < count; ++i) fn(i);
}

} // namespace twmx
