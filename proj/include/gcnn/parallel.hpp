#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace gcnn {

/// Worker count for a job pool: min(hardware, jobs), capped by
/// GATED_PARALING_THREADS when set.
inline int worker_count(int jobs) {
    int n = static_cast<int>(std::thread::hardware_concurrency());
    if (n <= 0) n = 1;
    if (const char* env = std::getenv("GATED_PARALING_THREADS")) {
        int v = std::atoi(env);
        if (v > 0) n = v;
    }
    return std::max(1, std::min(n, jobs));
}

/// Runs f(i) for i in [0, jobs). Each job must write only its own output
/// slot; results are then independent of scheduling order.
template <class F>
void parallel_for(int jobs, F&& f) {
    const int workers = worker_count(jobs);
    if (workers <= 1) {
        for (int i = 0; i < jobs; ++i) f(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (int i; (i = next.fetch_add(1)) < jobs;) f(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace gcnn
