#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace plsinet {

inline std::size_t resolve_jobs(std::size_t jobs, std::size_t tasks) {
    if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
    return std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(tasks, 1));
}

// Runs body(i) for i in [0, n) on up to `jobs` threads. Tasks are claimed in
// index order; the first exception stops further claims and is rethrown.
template <class Body>
void parallel_for(std::size_t n, std::size_t jobs, Body&& body) {
    jobs = resolve_jobs(jobs, n);
    if (jobs == 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) {
            try {
                body(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = n;
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(jobs);
    for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

} // namespace plsinet
