#pragma once

// Deterministic parallel reductions. Work is cut into fixed-size blocks by
// item index; each block is reduced sequentially and block results are folded
// into the total in block order, so the floating-point result does not depend
// on the number of worker threads.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

namespace filterlab {

struct ParallelOptions {
    int threads = 1;
    std::size_t block_size = 1024;
};

/// Run body(i) for i in [0, n) on up to `threads` workers. Order-insensitive work only.
template <class Body>
void parallel_for(std::size_t n, int threads, Body&& body)
{
    threads = std::max(1, threads);
    if (threads == 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                next.store(n);
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    const auto count = static_cast<std::size_t>(threads);
    pool.reserve(count);
    for (std::size_t t = 0; t < std::min(count, n); ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

/**
 * Blocked deterministic reduction over items [0, n).
 *
 * make() creates an empty accumulator; accumulate(acc, i) folds item i into a
 * block accumulator; fold(total, block) merges block results in index order.
 */
template <class Make, class Accumulate, class Fold>
auto blocked_reduce(std::size_t n, const ParallelOptions& opts, Make make, Accumulate accumulate,
                    Fold fold)
{
    using Acc = decltype(make());
    Acc total = make();
    const std::size_t block = std::max<std::size_t>(1, opts.block_size);
    const std::size_t blocks = (n + block - 1) / block;
    const std::size_t wave = static_cast<std::size_t>(std::max(1, opts.threads));
    for (std::size_t first = 0; first < blocks; first += wave) {
        const std::size_t count = std::min(wave, blocks - first);
        std::vector<std::optional<Acc>> partial(count);
        parallel_for(count, opts.threads, [&](std::size_t w) {
            Acc acc = make();
            const std::size_t lo = (first + w) * block;
            const std::size_t hi = std::min(n, lo + block);
            for (std::size_t i = lo; i < hi; ++i) accumulate(acc, i);
            partial[w].emplace(std::move(acc));
        });
        for (auto& p : partial) fold(total, std::move(*p));
    }
    return total;
}

}  // namespace filterlab
