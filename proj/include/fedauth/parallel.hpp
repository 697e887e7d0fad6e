#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace fedauth {

// Runs fn(i) for i in [0,n) across up to `threads` workers on contiguous
// index chunks. Callers write into preallocated per-index slots, so output
// never depends on scheduling. threads <= 1 degrades to a plain loop.
template <typename Fn>
void parallel_for(size_t n, int threads, Fn&& fn) {
    if (threads <= 1 || n <= 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    size_t workers = std::min<size_t>(static_cast<size_t>(threads), n);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    size_t chunk = (n + workers - 1) / workers;
    for (size_t w = 0; w < workers; ++w) {
        size_t begin = w * chunk;
        size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([begin, end, &fn] {
            for (size_t i = begin; i < end; ++i) fn(i);
        });
    }
    for (std::thread& t : pool) t.join();
}

}  // namespace fedauth
