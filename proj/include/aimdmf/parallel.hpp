#pragma once

#include <cstddef>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>

namespace aimdmf {

/// Runs body(i) for i in [0, n) on up to `threads` OpenMP threads. Bodies must
/// only write to state owned by index i, so the result is schedule independent.
/// If bodies throw, the exception of the lowest failing index is rethrown.
template <class Body>
void parallel_for(std::size_t n, int threads, Body&& body) {
    const auto count = static_cast<std::int64_t>(n);
    if (threads <= 1 || n < 2) {
        for (std::int64_t i = 0; i < count; ++i) body(static_cast<std::size_t>(i));
        return;
    }
    std::mutex guard;
    std::exception_ptr first;
    std::int64_t first_index = std::numeric_limits<std::int64_t>::max();
#pragma omp parallel for schedule(static) num_threads(threads)
    for (std::int64_t i = 0; i < count; ++i) {
        try {
            body(static_cast<std::size_t>(i));
        } catch (...) {
            std::lock_guard lock(guard);
            if (i < first_index) {
                first_index = i;
                first = std::current_exception();
            }
        }
    }
    if (first) std::rethrow_exception(first);
}

}  // namespace aimdmf
