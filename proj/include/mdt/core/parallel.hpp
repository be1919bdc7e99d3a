#pragma once

#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

#include "mdt/core/tensor.hpp"

namespace mdt {

// Data-loading parallelism knob; compute stays deterministic regardless of
// the worker count because every slot writes only its own output.
inline int env_workers() {
  if (const char* env = std::getenv("MDT_NUM_WORKERS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return 1;
}

template <class F>
void parallel_for(i64 n, int workers, F&& fn) {
  if (workers <= 1 || n <= 1) {
    for (i64 i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<i64> next{0};
  auto run = [&] {
    for (i64 i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
  };
  std::vector<std::thread> pool;
  const int k = static_cast<int>(std::min<i64>(workers, n));
  pool.reserve(static_cast<size_t>(k - 1));
  for (int t = 1; t < k; ++t) pool.emplace_back(run);
  run();
  for (auto& th : pool) th.join();
}

}  // namespace mdt
