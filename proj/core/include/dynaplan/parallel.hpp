#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace dynaplan {

// Runs fn(0..n-1) across `workers` threads. Callers must write results into
// index-addressed slots so the outcome is identical for any worker count.
inline void parallel_for(size_t n, int workers, const std::function<void(size_t)>& fn) {
    if (n == 0) { return; }
    if (workers <= 1 || n == 1) {
        for (size_t i = 0; i < n; ++i) { fn(i); }
        return;
    }
    std::atomic<size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mu;
    auto body = [&] {
        while (true) {
            const size_t i = next.fetch_add(1);
            if (i >= n || failed.load()) { return; }
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mu);
                if (!error) { error = std::current_exception(); }
                failed.store(true);
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    const size_t count = std::min<size_t>(static_cast<size_t>(workers), n);
    pool.reserve(count);
    for (size_t w = 0; w < count; ++w) { pool.emplace_back(body); }
    for (auto& th : pool) { th.join(); }
    if (error) { std::rethrow_exception(error); }
}

}  // namespace dynaplan
