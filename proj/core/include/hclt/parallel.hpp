#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace hclt {

/// Worker count from HCLT_WORKERS, falling back to 1.
unsigned default_workers();

/// Resolves 0 to default_workers().
inline unsigned resolve_workers(unsigned workers) { return workers == 0 ? default_workers() : workers; }

/// Runs body(i) for every i in [0, count). Chunks are handed out in a fixed
/// interleaved order; any body that writes only to slot i gives results
/// independent of the worker count.
template <typename Body>
void parallel_for(std::size_t count, unsigned workers, Body&& body) {
  workers = std::max(1U, std::min<unsigned>(resolve_workers(workers), static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < count; i += workers) body(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

/// Fixed-size chunking of [0, count): chunk c covers [c*size, min(count, (c+1)*size)).
struct Chunking {
  std::size_t count;
  std::size_t size;

  std::size_t chunks() const { return size == 0 ? 0 : (count + size - 1) / size; }
  std::size_t begin(std::size_t c) const { return c * size; }
  std::size_t end(std::size_t c) const { return std::min(count, (c + 1) * size); }
};

/// Map-reduce over fixed chunks. Each chunk is folded sequentially by
/// map(begin, end); the partial results are combined in chunk order, so the
/// floating-point result does not depend on the worker count.
template <typename T, typename Map, typename Combine>
T chunked_reduce(Chunking chunking, unsigned workers, T init, Map&& map, Combine&& combine) {
  std::vector<T> partial(chunking.chunks(), init);
  parallel_for(chunking.chunks(), workers,
               [&](std::size_t c) { partial[c] = map(chunking.begin(c), chunking.end(c)); });
  T total = std::move(init);
  for (auto& p : partial) total = combine(std::move(total), std::move(p));
  return total;
}

}  // namespace hclt
