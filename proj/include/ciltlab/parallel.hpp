#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace ciltlab {

// Worker cap: --threads flag wins, else CILTLAB_THREADS, else hardware.
inline int default_thread_count() {
  if (const char* env = std::getenv("CILTLAB_THREADS")) {
    int n = std::atoi(env);
    if (n > 0) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs fn(chunk_index) for chunk_index in [0, n_chunks). Chunk boundaries are
// fixed by the caller, so results are identical for any worker count as long
// as fn writes only to its own chunk's slots.
inline void parallel_chunks(int64_t n_chunks, int threads,
                            const std::function<void(int64_t)>& fn) {
  if (threads <= 0) threads = default_thread_count();
  threads = static_cast<int>(std::min<int64_t>(threads, n_chunks));
  if (threads <= 1) {
    for (int64_t c = 0; c < n_chunks; ++c) fn(c);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  std::atomic<int64_t> next{0};
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&]() {
      for (;;) {
        int64_t c = next.fetch_add(1);
        if (c >= n_chunks) return;
        fn(c);
      }
    });
  }
  for (auto& th : pool) th.join();
}

// Pairwise summation in fixed index order; bit-stable across thread counts.
template <typename T>
T pairwise_sum(const std::vector<T>& v, size_t lo, size_t hi) {
  if (hi - lo <= 8) {
    T acc = T(0);
    for (size_t i = lo; i < hi; ++i) acc += v[i];
    return acc;
  }
  size_t mid = lo + (hi - lo) / 2;
  return pairwise_sum(v, lo, mid) + pairwise_sum(v, mid, hi);
}

template <typename T>
T pairwise_sum(const std::vector<T>& v) {
  if (v.empty()) return T(0);
  return pairwise_sum(v, 0, v.size());
}

}  // namespace ciltlab
