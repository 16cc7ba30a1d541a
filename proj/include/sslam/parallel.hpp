#pragma once

#include <functional>
#include <thread>
#include <vector>

namespace sslam {

inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Runs fn(index, worker) for index in [0, count). Indices are assigned to
/// workers statically (index % workers), so any per-worker accumulation is
/// reproducible run-to-run for a fixed worker count. Merge per-worker state
/// in worker order afterwards to keep reductions deterministic.
template <typename Fn>
void parallel_for(int count, int threads, Fn&& fn) {
  int workers = resolve_threads(threads);
  if (workers <= 1 || count <= 1) {
    for (int i = 0; i < count; ++i) fn(i, 0);
    return;
  }
  if (workers > count) workers = count;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w]() {
      for (int i = w; i < count; i += workers) fn(i, w);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace sslam
