#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace expfam {

/// Runs fn(i) for i in [0, count) on up to max_threads workers
/// (hardware concurrency when max_threads <= 0). Tasks must be independent;
/// callers write results into preallocated per-index slots so aggregation
/// order cannot affect the outcome. The first exception, if any, is
/// rethrown after all workers join.
inline void parallel_for_indexed(long count, int max_threads,
                                 const std::function<void(long)>& fn) {
    if (count <= 0) return;
    int workers = max_threads > 0 ? max_threads
                                  : static_cast<int>(std::thread::hardware_concurrency());
    workers = std::max(1, std::min<long>(workers, count) > 0
                              ? static_cast<int>(std::min<long>(workers, count))
                              : 1);
    if (workers == 1) {
        for (long i = 0; i < count; ++i) fn(i);
        return;
    }

    std::atomic<long> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (long i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace expfam
