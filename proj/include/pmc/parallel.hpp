#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace pmc {

inline unsigned default_jobs() {
  unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : n;
}

// Calls f(k) for k in [0, n) using up to `jobs` threads. Indices are split into
// contiguous blocks, so any per-index output written by f is independent of the
// thread count. The first exception thrown by a worker is rethrown.
template <class F>
void parallel_for(std::size_t n, unsigned jobs, F&& f) {
  if (n == 0) return;
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(n)));
  if (jobs == 1) {
    for (std::size_t k = 0; k < n; ++k) f(k);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> workers;
    workers.reserve(jobs);
    const std::size_t block = (n + jobs - 1) / jobs;
    for (unsigned w = 0; w < jobs; ++w) {
      const std::size_t lo = w * block;
      const std::size_t hi = std::min(n, lo + block);
      if (lo >= hi) break;
      workers.emplace_back([&, lo, hi] {
        try {
          for (std::size_t k = lo; k < hi; ++k) f(k);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace pmc
