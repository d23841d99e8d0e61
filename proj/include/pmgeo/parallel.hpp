#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace pmgeo {

/// Worker count for the data-parallel loops. 0 picks hardware_concurrency.
struct Execution {
    unsigned threads = 0;

    unsigned resolved() const {
        if (threads != 0) return threads;
        const unsigned hw = std::thread::hardware_concurrency();
        return hw == 0 ? 1 : hw;
    }
};

/// Runs fn(worker, begin, end) over contiguous chunks of [0, n). Chunks are
/// static, so any per-index output written by `fn` is independent of the
/// thread count; callers reduce those outputs in index order afterwards.
template <class Fn>
void parallel_chunks(std::size_t n, Execution exec, Fn&& fn) {
    const std::size_t workers = std::min<std::size_t>(exec.resolved(), n);
    if (workers <= 1) {
        if (n > 0) fn(std::size_t{0}, std::size_t{0}, n);
        return;
    }
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = n * w / workers;
        const std::size_t end = n * (w + 1) / workers;
        pool.emplace_back([&, w, begin, end] {
            try {
                fn(w, begin, end);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace pmgeo
