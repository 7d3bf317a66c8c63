#pragma once

#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace mmhash {

/// Worker count for data-parallel loops: MMHASH_THREADS when set (minimum 1),
/// otherwise hardware concurrency.
inline size_t thread_budget() {
  if (const char* env = std::getenv("MMHASH_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<size_t>(v);
    return 1;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

/// Runs fn(i) for i in [0, n) over contiguous chunks. Callers must write only
/// to per-index slots so the result is independent of scheduling.
inline void parallel_for(size_t n, const std::function<void(size_t)>& fn) {
  const size_t workers = std::min(thread_budget(), n);
  if (workers <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const size_t chunk = (n + workers - 1) / workers;
  for (size_t w = 0; w < workers; ++w) {
    const size_t lo = w * chunk;
    const size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace mmhash
