#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <future>
#include <vector>

namespace chitree {

// Run fn(i) for i in [0, n) on up to `threads` workers.  Each index writes
// only its own output slot, so results are identical to the sequential run.
template <typename Fn>
void parallel_for(int n, int threads, Fn&& fn) {
    if (n <= 0) return;
    if (threads <= 1 || n == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    auto worker = [&]() {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= n) return;
            fn(i);
        }
    };
    const int n_workers = std::min(threads, n);
    std::vector<std::future<void>> futures;
    futures.reserve(n_workers);
    for (int w = 0; w < n_workers; ++w)
        futures.push_back(std::async(std::launch::async, worker));
    std::exception_ptr first_error;
    for (auto& f : futures) {
        try {
            f.get();
        } catch (...) {
            if (!first_error) first_error = std::current_exception();
        }
    }
    if (first_error) std::rethrow_exception(first_error);
}

} // namespace chitree
