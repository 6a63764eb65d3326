#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace ringsim {

// Worker count: RINGSIM_THREADS if set and positive, otherwise hardware concurrency.
inline unsigned worker_count() {
    if (const char* env = std::getenv("RINGSIM_THREADS")) {
        try {
            const long n = std::stol(env);
            if (n > 0) return static_cast<unsigned>(n);
        } catch (...) {
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

namespace detail {
inline thread_local bool in_worker = false;
}

// Runs body(begin, end) over contiguous chunks of [0, n). Chunk boundaries depend
// only on n and the worker count, so results written per index are deterministic.
template <typename Body>
void parallel_chunks(std::size_t n, Body&& body, unsigned workers = worker_count()) {
    if (n == 0) return;
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, n));
    // nested regions run serially inside the enclosing worker
    if (workers <= 1 || detail::in_worker) {
        body(std::size_t{0}, n);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&, w, begin, end] {
            detail::in_worker = true;
            try {
                body(begin, end);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

// Independent tasks indexed 0..n-1; each task writes only its own slot.
template <typename Task>
void parallel_for(std::size_t n, Task&& task, unsigned workers = worker_count()) {
    parallel_chunks(
        n,
        [&](std::size_t b, std::size_t e) {
            for (std::size_t i = b; i < e; ++i) task(i);
        },
        workers);
}

}  // namespace ringsim
