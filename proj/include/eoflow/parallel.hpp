#ifndef EOFLOW_PARALLEL_HPP
#define EOFLOW_PARALLEL_HPP

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace eoflow {

// Number of worker threads: min(hardware, EOFLOW_THREADS if set).
inline int max_threads() {
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    if (hw < 1) hw = 1;
    if (const char* env = std::getenv("EOFLOW_THREADS")) {
        int cap = std::atoi(env);
        if (cap >= 1 && cap < hw) hw = cap;
    }
    return hw;
}

// Runs body(i) for i in [0, n). Work is split into contiguous chunks, one per
// thread. body must only write to per-index slots; exceptions are rethrown on
// the calling thread.
inline void parallel_for(int64_t n, const std::function<void(int64_t)>& body) {
    if (n <= 0) return;
    int threads = max_threads();
    if (threads <= 1 || n == 1) {
        for (int64_t i = 0; i < n; ++i) body(i);
        return;
    }
    if (threads > n) threads = static_cast<int>(n);
    std::vector<std::thread> pool;
    std::exception_ptr first_error;
    std::mutex error_mutex;
    int64_t chunk = (n + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
        int64_t lo = t * chunk;
        int64_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&, lo, hi]() {
            try {
                for (int64_t i = lo; i < hi; ++i) body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

// Pairwise-tree summation over a slot vector. The reduction order depends
// only on the number of slots, never on the thread count, so results are
// reproducible across machines with different parallelism.
inline double pairwise_sum(const std::vector<double>& v) {
    std::vector<double> level(v);
    while (level.size() > 1) {
        std::vector<double> next((level.size() + 1) / 2);
        for (size_t i = 0; i + 1 < level.size(); i += 2) next[i / 2] = level[i] + level[i + 1];
        if (level.size() % 2) next.back() = level.back();
        level.swap(next);
    }
    return level.empty() ? 0.0 : level[0];
}

// Pairwise reduction of equally-sized vectors (e.g. per-sample gradients).
// combine(a, b) accumulates b into a.
template <typename T>
T pairwise_reduce(std::vector<T> items, const std::function<void(T&, const T&)>& combine) {
    while (items.size() > 1) {
        std::vector<T> next;
        next.reserve((items.size() + 1) / 2);
        for (size_t i = 0; i + 1 < items.size(); i += 2) {
            combine(items[i], items[i + 1]);
            next.push_back(std::move(items[i]));
        }
        if (items.size() % 2) next.push_back(std::move(items.back()));
        items.swap(next);
    }
    return std::move(items[0]);
}

}  // namespace eoflow

#endif
