#pragma once

#include <cstddef>
#include <exception>
#include <mutex>

#include <omp.h>

namespace mdiff::parallel {

/// Caps the worker pool; n <= 0 restores the OpenMP default.
void set_threads(int n);
int max_threads();

/// Runs body(i) for i in [0, n) on the OpenMP pool with a static schedule.
/// The first exception thrown by any iteration is rethrown on the caller.
template <typename Body>
void for_each_index(std::ptrdiff_t n, Body&& body) {
    std::exception_ptr failure;
    std::mutex failure_lock;
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        try {
            body(i);
        } catch (...) {
            std::lock_guard<std::mutex> guard(failure_lock);
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
}

}  // namespace mdiff::parallel
