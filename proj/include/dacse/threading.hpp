#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace dacse {

// Worker-count knob, set once by the CLI from --jobs. Every parallel loop in
// the library partitions work so that each output element is produced by
// exactly one worker with a fixed iteration order, so results are identical
// for any jobs value.
inline int& jobs_ref() {
    static int jobs = 1;
    return jobs;
}

inline void set_jobs(int n) { jobs_ref() = std::max(1, n); }
inline int jobs() { return jobs_ref(); }

// Runs fn(begin, end) over a partition of [0, n). Falls back to a plain call
// when a single worker is configured or the range is small.
template <typename Fn>
void parallel_for(size_t n, Fn&& fn, size_t min_grain = 1) {
    const size_t workers = std::min<size_t>(static_cast<size_t>(jobs()), std::max<size_t>(1, n / std::max<size_t>(1, min_grain)));
    if (workers <= 1 || n == 0) {
        fn(size_t{0}, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const size_t chunk = (n + workers - 1) / workers;
    for (size_t w = 0; w < workers; ++w) {
        const size_t lo = w * chunk;
        const size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&fn, lo, hi] { fn(lo, hi); });
    }
    for (auto& t : pool) t.join();
}

}  // namespace dacse
