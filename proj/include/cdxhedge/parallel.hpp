#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace cdxhedge {

/// Static strided partition over [0, n). Each worker touches only its own
/// indices, so results are identical for any thread count as long as fn(i)
/// writes to per-index slots.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
    std::vector<std::thread> pool;
    pool.reserve(k);
    for (std::size_t w = 0; w < k; ++w)
        pool.emplace_back([&fn, w, k, n] {
            for (std::size_t i = w; i < n; i += k) fn(i);
        });
    for (auto& t : pool) t.join();
}

}  // namespace cdxhedge
