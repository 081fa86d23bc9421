#pragma once

#include <algorithm>
#include <cstdlib>
#include <thread>
#include <vector>

namespace nhl {

// Worker count from NHL_THREADS (default 1). Parallel regions partition
// disjoint output ranges and keep every per-element accumulation sequential,
// so results are bitwise identical for any thread count.
inline int& thread_count_ref() {
  static int count = [] {
    const char* env = std::getenv("NHL_THREADS");
    if (env == nullptr) return 1;
    const int v = std::atoi(env);
    return std::clamp(v, 1, 256);
  }();
  return count;
}

inline int thread_count() { return thread_count_ref(); }
inline void set_thread_count(int n) { thread_count_ref() = std::clamp(n, 1, 256); }

// fn(begin, end) over [0, n) split into contiguous chunks.
template <typename F>
void parallel_for(long long n, F&& fn) {
  const int workers = std::min<long long>(thread_count(), n);
  if (workers <= 1) {
    if (n > 0) fn(0LL, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(workers));
  const long long chunk = (n + workers - 1) / workers;
  for (int t = 0; t < workers; ++t) {
    const long long begin = t * chunk;
    const long long end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
  for (std::thread& th : pool) th.join();
}

}  // namespace nhl
