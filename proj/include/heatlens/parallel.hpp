#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace heatlens {

// Thread count from HEATLENS_THREADS, default 1.
inline unsigned thread_count() {
    const char* env = std::getenv("HEATLENS_THREADS");
    if (!env) return 1;
    try {
        int v = std::stoi(env);
        return v > 0 ? static_cast<unsigned>(v) : 1u;
    } catch (...) {
        return 1;
    }
}

// Calls body(i) for i in [0, n). Each index is handled by exactly one thread,
// so results written per index do not depend on the thread count.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
    unsigned threads = std::min<std::size_t>(thread_count(), std::max<std::size_t>(n, 1));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    std::size_t chunk = (n + threads - 1) / threads;
    for (unsigned k = 0; k < threads; ++k) {
        std::size_t lo = k * chunk, hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &body] {
            for (std::size_t i = lo; i < hi; ++i) body(i);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace heatlens
