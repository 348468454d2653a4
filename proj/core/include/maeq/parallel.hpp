#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace maeq {

/// Worker count for `requested` (0 = hardware concurrency), never above `jobs`.
inline std::size_t resolve_threads(std::size_t requested, std::size_t jobs) {
    std::size_t t = requested == 0 ? std::thread::hardware_concurrency() : requested;
    return std::max<std::size_t>(1, std::min(t == 0 ? 1 : t, jobs));
}

/// Calls fn(i) for i in [0, n) on `threads` workers. Work is claimed from an
/// atomic counter, so fn must write only to slot i of its output. The first
/// exception thrown by any job is rethrown after all workers join.
template <class Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
    const std::size_t workers = resolve_threads(threads, n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto body = [&] {
        for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                next.store(n);
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(body);
    body();
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace maeq
