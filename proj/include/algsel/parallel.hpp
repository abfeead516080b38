#ifndef ALGSEL_PARALLEL_HPP
#define ALGSEL_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace algsel {

/// 0 means "one per hardware thread".
inline int resolve_jobs(int requested) {
  if (requested > 0) return requested;
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

/// Calls f(i) for every i in [0, count) on up to `jobs` threads. Tasks are
/// handed out in index order; results must not depend on which thread runs
/// them. The first exception stops the hand-out and is rethrown.
template <class F>
void parallel_for(std::size_t count, int jobs, F&& f) {
  const auto workers = static_cast<std::size_t>(std::min<std::size_t>(count, static_cast<std::size_t>(resolve_jobs(jobs))));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto run = [&] {
    for (;;) {
      if (failed.load()) return;
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        f(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        failed = true;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace algsel

#endif  // ALGSEL_PARALLEL_HPP
