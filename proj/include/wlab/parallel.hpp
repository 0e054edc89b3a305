#pragma once

// Deterministic work sharing.  Work is cut into fixed-size chunks whose
// boundaries do not depend on the worker count; partial results are keyed
// by chunk index and combined in index order, so outputs are identical for
// any number of workers.

#include <atomic>
#include <cstdlib>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace wlab {

inline int resolve_workers(std::optional<int> requested) {
  if (requested && *requested > 0) return *requested;
  if (const char* env = std::getenv("WILLMORE_LAB_WORKERS")) {
    int v = std::atoi(env);
    if (v > 0) return v;
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc > 0 ? int(hc) : 1;
}

// body(chunk_index, begin, end); chunk layout is fixed by n and chunk_size.
template <class Body>
void parallel_chunks(std::size_t n, std::size_t chunk_size, int workers,
                     Body&& body) {
  if (n == 0) return;
  if (chunk_size == 0) chunk_size = 1;
  std::size_t n_chunks = (n + chunk_size - 1) / chunk_size;
  if (workers <= 1 || n_chunks == 1) {
    for (std::size_t c = 0; c < n_chunks; ++c)
      body(c, c * chunk_size, std::min(n, (c + 1) * chunk_size));
    return;
  }
  std::atomic<std::size_t> next{0};
  auto run = [&] {
    for (;;) {
      std::size_t c = next.fetch_add(1);
      if (c >= n_chunks) break;
      body(c, c * chunk_size, std::min(n, (c + 1) * chunk_size));
    }
  };
  std::vector<std::thread> pool;
  int nt = std::min<std::size_t>(workers, n_chunks);
  pool.reserve(nt);
  for (int t = 0; t < nt; ++t) pool.emplace_back(run);
  for (auto& th : pool) th.join();
}

// Sum doubles chunk-wise with a combination order independent of workers.
template <class Term>
double parallel_sum(std::size_t n, int workers, Term&& term) {
  const std::size_t chunk = 2048;
  std::size_t n_chunks = n == 0 ? 0 : (n + chunk - 1) / chunk;
  std::vector<double> partial(n_chunks, 0.0);
  parallel_chunks(n, chunk, workers, [&](std::size_t c, std::size_t b, std::size_t e) {
    double s = 0.0;
    for (std::size_t i = b; i < e; ++i) s += term(i);
    partial[c] = s;
  });
  double total = 0.0;
  for (double s : partial) total += s;
  return total;
}

}  // namespace wlab
