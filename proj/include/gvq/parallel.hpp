#pragma once

#include <cstdlib>
#include <cstdint>
#include <algorithm>
#include <string>
#include <thread>
#include <vector>

namespace gvq {

/// Worker cap: GVQ_THREADS env var if set, else hardware concurrency.
inline unsigned thread_budget() {
    if (const char* env = std::getenv("GVQ_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1)
            return static_cast<unsigned>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw ? hw : 1u;
}

/// Apply f(i) for i in [begin, end). Work is split into contiguous chunks;
/// results must be written to per-index slots so the outcome is independent
/// of the thread count.
template <class F>
void parallel_for(std::size_t begin, std::size_t end, F&& f) {
    const std::size_t n = end > begin ? end - begin : 0;
    const unsigned budget = thread_budget();
    if (n == 0)
        return;
    if (budget <= 1 || n < 2 * budget) {
        for (std::size_t i = begin; i < end; ++i)
            f(i);
        return;
    }
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(budget, n));
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
        const std::size_t lo = begin + static_cast<std::size_t>(w) * chunk;
        const std::size_t hi = std::min(end, lo + chunk);
        if (lo >= hi)
            break;
        pool.emplace_back([lo, hi, &f] {
            for (std::size_t i = lo; i < hi; ++i)
                f(i);
        });
    }
    for (auto& t : pool)
        t.join();
}

} // namespace gvq
