#pragma once

#include <cstdint>
#include <thread>
#include <vector>

namespace lvic {

inline int resolve_threads(int requested) {
  if (requested > 0) {
    return requested;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

// Runs fn(begin, end) over contiguous index ranges covering [0, total).
// Partitioning must not affect results; callers write disjoint output.
template <typename Fn>
void parallel_chunks(int64_t total, int threads, Fn&& fn) {
  threads = resolve_threads(threads);
  if (total <= 0) {
    return;
  }
  if (threads <= 1 || total == 1) {
    fn(int64_t{0}, total);
    return;
  }
  const int workers = static_cast<int>(std::min<int64_t>(threads, total));
  const int64_t chunk = (total + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    const int64_t begin = w * chunk;
    const int64_t end = std::min<int64_t>(begin + chunk, total);
    if (begin >= end) {
      break;
    }
    pool.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
  for (auto& t : pool) {
    t.join();
  }
}

}  // namespace lvic
