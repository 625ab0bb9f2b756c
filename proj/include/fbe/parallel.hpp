#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace fbe {

// Runs fn(begin, end) on contiguous index blocks across worker threads.
// Callers must keep blocks independent (each index writes its own slot),
// which makes the result identical for any thread count.
template <typename Fn>
void parallel_blocks(std::size_t count, Fn&& fn) {
    const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
    const std::size_t workers = std::min<std::size_t>(hw, std::max<std::size_t>(count, 1));
    if (workers <= 1 || count < 2) {
        fn(std::size_t{0}, count);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (count + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(count, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&fn, begin, end] { fn(begin, end); });
    }
    for (auto& t : pool) t.join();
}

}  // namespace fbe
