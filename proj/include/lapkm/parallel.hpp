#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace lapkm {

namespace detail {
inline std::atomic<int>& thread_setting() {
    static std::atomic<int> threads{0};
    return threads;
}
}  // namespace detail

/// Worker count for parallel_for; 0 means hardware concurrency.
inline void set_num_threads(int threads) { detail::thread_setting() = std::max(0, threads); }

inline int num_threads() {
    int t = detail::thread_setting();
    if (t == 0) t = static_cast<int>(std::thread::hardware_concurrency());
    return std::max(1, t);
}

/// Runs fn(i) for i in [begin, end) over statically partitioned chunks.
/// Callers only use it where iterations write disjoint outputs, so results do not
/// depend on the thread count.
template <typename Fn>
void parallel_for(std::ptrdiff_t begin, std::ptrdiff_t end, Fn&& fn) {
    const std::ptrdiff_t count = end - begin;
    if (count <= 0) return;
    const std::ptrdiff_t workers = std::min<std::ptrdiff_t>(num_threads(), count);
    if (workers <= 1) {
        for (std::ptrdiff_t i = begin; i < end; ++i) fn(i);
        return;
    }
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    const std::ptrdiff_t chunk = (count + workers - 1) / workers;
    for (std::ptrdiff_t w = 0; w < workers; ++w) {
        const std::ptrdiff_t lo = begin + w * chunk;
        const std::ptrdiff_t hi = std::min(end, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&, lo, hi] {
            try {
                for (std::ptrdiff_t i = lo; i < hi; ++i) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace lapkm
