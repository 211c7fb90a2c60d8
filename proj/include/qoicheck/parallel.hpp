// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace qoicheck {

/// Runs body(r) for r = 1..count on `workers` threads. Indices are handed
/// out in increasing order; once `stop` is set no new index is started.
template <class Body>
void for_each_replication(long count, int workers, std::atomic<bool>& stop, Body&& body) {
  std::atomic<long> next{1};
  auto loop = [&] {
    for (;;) {
      if (stop.load()) return;
      const long r = next.fetch_add(1);
      if (r > count) return;
      body(r);
    }
  };
  const int n = std::max(1, std::min<int>(workers, static_cast<int>(count)));
  if (n == 1) {
    loop();
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) pool.emplace_back(loop);
  for (auto& t : pool) t.join();
}

}  // namespace qoicheck
