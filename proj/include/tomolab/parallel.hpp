#pragma once

#include <cstddef>
#include <functional>

namespace tomolab {

// Worker count: TOMOLAB_THREADS if set (>= 1), else hardware concurrency.
unsigned worker_count();

// Runs body(b) for every block b in [0, n_blocks) on up to `workers` threads.
// Blocks are independent; callers combine per-block results in block order,
// which keeps reductions identical for any worker count.
void parallel_blocks(std::size_t n_blocks, const std::function<void(std::size_t)>& body,
                     unsigned workers = worker_count());

// Fixed partition of [0, n) into blocks of `block_size` items.
struct BlockRange {
    std::size_t begin;
    std::size_t end;
};
inline std::size_t block_count(std::size_t n, std::size_t block_size) {
    return (n + block_size - 1) / block_size;
}
inline BlockRange block_range(std::size_t b, std::size_t n, std::size_t block_size) {
    std::size_t begin = b * block_size;
    std::size_t end = begin + block_size < n ? begin + block_size : n;
    return {begin, end};
}

} // namespace tomolab
