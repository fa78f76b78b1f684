#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace fp::detail {

// Runs fn(i) for i in [0, n) on up to `jobs` threads. The first exception
// thrown by any worker is rethrown on the caller's thread.
template <typename Fn> void parallel_for(std::size_t n, int jobs, Fn &&fn) {
  const auto workers = static_cast<std::size_t>(std::max(1, jobs));
  if (workers == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i)
      fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n)
        return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error)
          error = std::current_exception();
        next.store(n);
      }
    }
  };
  std::vector<std::jthread> pool;
  for (std::size_t t = 0; t < std::min(workers, n); ++t)
    pool.emplace_back(worker);
  pool.clear();
  if (error)
    std::rethrow_exception(error);
}

} // namespace fp::detail
