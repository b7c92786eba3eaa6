#pragma once

#include <algorithm>
#include <cstdlib>
#include <cstddef>
#include <thread>
#include <vector>

namespace heatgrid {

// Worker count: HEATGRID_THREADS env var, else hardware concurrency.
inline std::size_t thread_count() {
    static const std::size_t count = [] {
        if (const char* env = std::getenv("HEATGRID_THREADS")) {
            long n = std::atol(env);
            if (n >= 1) return static_cast<std::size_t>(n);
        }
        std::size_t hw = std::thread::hardware_concurrency();
        return hw == 0 ? std::size_t{1} : hw;
    }();
    return count;
}

// Runs fn(lo, hi) over a static partition of [0, n). Each index is owned by
// exactly one worker, so results do not depend on scheduling or thread count
// as long as fn keeps a fixed reduction order within its range.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    if (n == 0) return;
    const std::size_t workers = std::min(thread_count(), n);
    if (workers <= 1) {
        fn(std::size_t{0}, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t lo = w * chunk;
        const std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&fn, lo, hi] { fn(lo, hi); });
    }
    for (auto& t : pool) t.join();
}

}  // namespace heatgrid
