#pragma once

#include <cstdint>
#include <exception>
#include <thread>
#include <utility>
#include <vector>

#include "sandpile/errors.hpp"

namespace sandpile {

// Splits [0, total) into one contiguous block per worker and runs
// fn(worker, begin, end) on each. Callers keep results reproducible across
// worker counts by seeding each item from its index and merging with
// order-independent (integer) accumulators.
template <typename Fn>
void parallel_blocks(int64_t total, int workers, Fn&& fn) {
    if (workers < 1) throw BadParameter("worker count must be >= 1");
    if (total <= 0) return;
    const auto w = static_cast<int64_t>(workers) < total ? static_cast<int64_t>(workers) : total;
    if (w == 1) {
        fn(0, int64_t{0}, total);
        return;
    }
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(static_cast<size_t>(w));
    const int64_t base = total / w;
    const int64_t extra = total % w;
    int64_t begin = 0;
    for (int64_t i = 0; i < w; ++i) {
        const int64_t end = begin + base + (i < extra ? 1 : 0);
        threads.emplace_back([&fn, &errors, i, begin, end] {
            try {
                fn(static_cast<int>(i), begin, end);
            } catch (...) {
                errors[static_cast<size_t>(i)] = std::current_exception();
            }
        });
        begin = end;
    }
    for (auto& t : threads) t.join();
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
}

} // namespace sandpile
