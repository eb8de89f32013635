#pragma once

#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace evla {

/// Worker count for per-row parallel loops: EVLA_THREADS when set (min 1),
/// otherwise hardware concurrency.
inline unsigned worker_count() {
    if (const char* env = std::getenv("EVLA_THREADS")) {
        const long n = std::strtol(env, nullptr, 10);
        if (n >= 1) return static_cast<unsigned>(n);
        return 1;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw ? hw : 1;
}

/// Runs fn(begin, end) over a static partition of [0, count). Results must
/// be written to disjoint, index-addressed storage so the outcome is
/// independent of the worker count.
inline void parallel_chunks(std::size_t count, const std::function<void(std::size_t, std::size_t)>& fn) {
    const unsigned workers = worker_count();
    if (workers <= 1 || count <= 1) {
        fn(0, count);
        return;
    }
    const std::size_t n = std::min<std::size_t>(workers, count);
    std::vector<std::thread> threads;
    threads.reserve(n);
    for (std::size_t w = 0; w < n; ++w) {
        const std::size_t begin = count * w / n;
        const std::size_t end = count * (w + 1) / n;
        threads.emplace_back([&fn, begin, end] { fn(begin, end); });
    }
    for (auto& t : threads) t.join();
}

}  // namespace evla
