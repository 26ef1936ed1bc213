#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

namespace otfpf {

inline int resolve_threads(int threads) {
  if (threads > 0) return threads;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

// Runs fn(0..count-1), possibly concurrently.  Tasks must be independent
// and write only to their own output slots; results then do not depend on
// the thread count or schedule.
inline void parallel_for(int64_t count, int threads,
                         const std::function<void(int64_t)>& fn) {
  threads = resolve_threads(threads);
  if (threads <= 1 || count <= 1) {
    for (int64_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int64_t> next{0};
  auto worker = [&] {
    for (;;) {
      const int64_t i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= count) return;
      fn(i);
    }
  };
  std::vector<std::thread> pool;
  const int n_workers = static_cast<int>(
      std::min<int64_t>(threads, count));
  pool.reserve(n_workers);
  for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
}

}  // namespace otfpf
