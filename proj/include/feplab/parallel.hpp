#pragma once

#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

#include "feplab/core.hpp"

namespace feplab {

// Thread count: min(hardware, FEPLAB_THREADS if set). Always >= 1.
inline unsigned effective_thread_count() {
    unsigned n = std::thread::hardware_concurrency();
    if (n == 0) n = 1;
    if (const char* env = std::getenv("FEPLAB_THREADS")) {
        const long cap = std::strtol(env, nullptr, 10);
        if (cap >= 1 && static_cast<unsigned>(cap) < n) n = static_cast<unsigned>(cap);
    }
    return n;
}

// Runs fn(begin, end) over disjoint chunks of [0, n). Work items must be
// independent; callers own deterministic reduction in index order.
inline void parallel_for_chunks(Index n, const std::function<void(Index, Index)>& fn) {
    const unsigned threads = effective_thread_count();
    if (threads <= 1 || n < 2) {
        fn(0, n);
        return;
    }
    const Index chunk = (n + static_cast<Index>(threads) - 1) / static_cast<Index>(threads);
    std::vector<std::thread> pool;
    for (Index begin = 0; begin < n; begin += chunk) {
        const Index end = std::min(n, begin + chunk);
        pool.emplace_back(fn, begin, end);
    }
    for (auto& t : pool) t.join();
}

}  // namespace feplab
