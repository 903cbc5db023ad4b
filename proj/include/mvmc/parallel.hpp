#pragma once

#include <cstddef>
#include <exception>
#include <mutex>

#include <omp.h>

namespace mvmc {

/// Runs body(i) for i in [0, count). workers <= 1 runs the plain serial loop;
/// otherwise iterations are distributed over an OpenMP team. Callers write
/// results to per-index slots, so output never depends on the schedule.
template <class Body>
void parallel_for(std::size_t count, int workers, Body&& body) {
    if (workers <= 1 || count < 2) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::exception_ptr failure;
    std::mutex failure_mutex;
    const auto n = static_cast<long long>(count);
#pragma omp parallel for num_threads(workers) schedule(dynamic, 1)
    for (long long i = 0; i < n; ++i) {
        try {
            body(static_cast<std::size_t>(i));
        } catch (...) {
            std::lock_guard<std::mutex> lock(failure_mutex);
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
}

}  // namespace mvmc
