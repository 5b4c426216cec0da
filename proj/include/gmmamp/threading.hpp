#pragma once

// Worker-count control and a deterministic chunked parallel loop.
//
// Monte Carlo work is always split into fixed-size chunks, each chunk seeds
// its own Rng from (seed, chunk index), and partial results are reduced in
// chunk order after the loop. The estimate is therefore bit-identical
// whether chunks run on one thread or eight.

#include <Eigen/Core>

#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace gmmamp {

namespace detail {
inline int& thread_count() {
  static int count = [] {
    if (const char* env = std::getenv("GMMAMP_THREADS")) {
      const int v = std::atoi(env);
      if (v > 0) return v;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
  }();
  return count;
}
}  // namespace detail

inline int num_threads() { return detail::thread_count(); }

inline void set_num_threads(int n) {
  if (n <= 0) return;
  detail::thread_count() = n;
  Eigen::setNbThreads(n);
}

// Runs eval(c) for c in [0, n_chunks). eval must write only to its own
// chunk's slot in caller-owned storage.
template <class F>
inline void parallel_chunks(long n_chunks, F&& eval) {
  const long workers = std::min<long>(num_threads(), n_chunks);
  if (workers <= 1) {
    for (long c = 0; c < n_chunks; ++c) eval(c);
    return;
  }
  std::atomic<long> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (long w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (long c; (c = next.fetch_add(1)) < n_chunks;) eval(c);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace gmmamp
