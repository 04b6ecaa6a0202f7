#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

namespace replica_sync {

/// Runs body(i) for i in [0, count) across up to `threads` workers.
///
/// Work is split into fixed-size chunks claimed dynamically; the caller's
/// reduction must combine per-chunk results in chunk order to stay bitwise
/// reproducible independent of the thread count. `chunk_results` is sized
/// to the number of chunks; body fills chunk c by iterating its index range.
template <typename ChunkState>
std::vector<ChunkState> parallel_chunks(
    std::int64_t count, int threads,
    const std::function<void(std::int64_t lo, std::int64_t hi, ChunkState&)>&
        body,
    std::int64_t chunk_size = 256) {
  if (count <= 0) return {};
  if (chunk_size < 1) chunk_size = 1;
  const std::int64_t n_chunks = (count + chunk_size - 1) / chunk_size;
  std::vector<ChunkState> results(static_cast<std::size_t>(n_chunks));
  if (threads <= 1 || n_chunks == 1) {
    for (std::int64_t c = 0; c < n_chunks; ++c) {
      const std::int64_t lo = c * chunk_size;
      const std::int64_t hi = std::min(count, lo + chunk_size);
      body(lo, hi, results[static_cast<std::size_t>(c)]);
    }
    return results;
  }
  std::atomic<std::int64_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::int64_t c = next.fetch_add(1);
      if (c >= n_chunks) return;
      const std::int64_t lo = c * chunk_size;
      const std::int64_t hi = std::min(count, lo + chunk_size);
      body(lo, hi, results[static_cast<std::size_t>(c)]);
    }
  };
  const int n_workers =
      static_cast<int>(std::min<std::int64_t>(threads, n_chunks));
  std::vector<std::thread> pool;
  pool.reserve(n_workers);
  for (int t = 0; t < n_workers; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  return results;
}

inline int hardware_threads() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

}  // namespace replica_sync
