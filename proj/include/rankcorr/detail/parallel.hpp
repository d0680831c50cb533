#pragma once

// Deterministic data parallelism over observation rows.
//
// Work is cut into a fixed number of chunks that depends only on the problem
// size; partial results are reduced in chunk order. The worker count only
// changes which thread evaluates a chunk, so results are bit-identical for
// any number of workers.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <functional>
#include <thread>
#include <utility>
#include <vector>

namespace rankcorr {

namespace detail {

inline std::atomic<int>& worker_setting() {
    static std::atomic<int> setting{-1};
    return setting;
}

inline bool& in_parallel_region() {
    thread_local bool flag = false;
    return flag;
}

}  // namespace detail

/// Sets the worker count for pairwise sums. 0 means "auto" (hardware
/// concurrency); negative restores the RANKCORR_THREADS default.
inline void set_worker_count(int workers) { detail::worker_setting().store(workers); }

inline int worker_count() {
    int w = detail::worker_setting().load();
    if (w < 0) {
        w = 0;
        if (const char* env = std::getenv("RANKCORR_THREADS")) w = std::max(0, std::atoi(env));
    }
    if (w == 0) w = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    return w;
}

namespace detail {

struct RowRange {
    std::size_t begin;
    std::size_t end;
};

inline constexpr std::size_t kMaxChunks = 64;

// Rows [0, n) split into chunks. For upper-triangular pair loops (row i pairs
// with j > i) the boundaries balance the pair count rather than the row count.
inline std::vector<RowRange> row_chunks(std::size_t n, bool triangular) {
    const std::size_t chunks = std::max<std::size_t>(1, std::min(kMaxChunks, n / 16));
    std::vector<RowRange> out;
    out.reserve(chunks);
    std::size_t begin = 0;
    for (std::size_t c = 1; c <= chunks; ++c) {
        std::size_t end = n;
        if (c < chunks) {
            const double frac = static_cast<double>(c) / static_cast<double>(chunks);
            end = triangular ? static_cast<std::size_t>(static_cast<double>(n) * (1.0 - std::sqrt(1.0 - frac)))
                             : static_cast<std::size_t>(static_cast<double>(n) * frac);
            end = std::clamp(end, begin, n);
        }
        if (end > begin) out.push_back({begin, end});
        begin = end;
    }
    return out;
}

// Evaluates f(range) for every chunk and returns the partials in chunk order.
template <class Partial, class F>
std::vector<Partial> map_chunks(std::size_t n, bool triangular, F&& f) {
    const auto ranges = row_chunks(n, triangular);
    std::vector<Partial> partials(ranges.size());
    const int workers = in_parallel_region() ? 1 : std::min<int>(worker_count(), static_cast<int>(ranges.size()));
    // Small problems are not worth a thread launch.
    if (workers <= 1 || n < 128) {
        for (std::size_t c = 0; c < ranges.size(); ++c) partials[c] = f(ranges[c]);
        return partials;
    }
    std::atomic<std::size_t> next{0};
    auto run = [&] {
        in_parallel_region() = true;
        for (std::size_t c = next.fetch_add(1); c < ranges.size(); c = next.fetch_add(1)) partials[c] = f(ranges[c]);
        in_parallel_region() = false;
    };
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(workers - 1));
    for (int w = 1; w < workers; ++w) pool.emplace_back(run);
    run();
    return partials;
}

}  // namespace detail

/// Runs job(k) for k in [0, count) across the worker pool. Jobs must write
/// to disjoint outputs; nested pairwise sums inside a job run serially.
template <class Job>
void parallel_for(std::size_t count, Job&& job) {
    const int workers = detail::in_parallel_region() ? 1 : std::min<int>(worker_count(), static_cast<int>(count));
    if (workers <= 1) {
        for (std::size_t k = 0; k < count; ++k) job(k);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    auto run = [&] {
        detail::in_parallel_region() = true;
        for (std::size_t k = next.fetch_add(1); k < count; k = next.fetch_add(1)) {
            try {
                job(k);
            } catch (...) {
                if (!failed.exchange(true)) failure = std::current_exception();
            }
        }
        detail::in_parallel_region() = false;
    };
    {
        std::vector<std::jthread> pool;
        for (int w = 1; w < workers; ++w) pool.emplace_back(run);
        run();
    }
    if (failure) std::rethrow_exception(failure);
}

}  // namespace rankcorr
