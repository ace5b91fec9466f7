#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace ltsm {

/// Runs body(i) for i in [0, n) on up to `threads` workers. Work items are assigned
/// in contiguous blocks; callers write results by index, so the output never depends
/// on the worker count. The first exception thrown by any item is rethrown.
template <class Body>
void parallel_for(std::size_t n, unsigned threads, Body&& body) {
    threads = std::max(1u, threads);
    if (threads == 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    const std::size_t workers = std::min<std::size_t>(threads, n);
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            const std::size_t begin = n * w / workers;
            const std::size_t end = n * (w + 1) / workers;
            try {
                for (std::size_t i = begin; i < end; ++i) body(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

/// Like parallel_for, but gives each worker its own state built by make_state().
/// Useful for per-thread scratch buffers and FFT plans.
template <class MakeState, class Body>
void parallel_for_with_state(std::size_t n, unsigned threads, MakeState&& make_state, Body&& body) {
    threads = std::max(1u, threads);
    const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(threads, n));
    std::vector<std::size_t> ids(workers);
    for (std::size_t w = 0; w < workers; ++w) ids[w] = w;
    parallel_for(workers, static_cast<unsigned>(workers), [&](std::size_t w) {
        auto state = make_state();
        const std::size_t begin = n * w / workers;
        const std::size_t end = n * (w + 1) / workers;
        for (std::size_t i = begin; i < end; ++i) body(state, i);
    });
}

}  // namespace ltsm
