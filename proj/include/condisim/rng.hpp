#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <random>
#include <thread>
#include <vector>

namespace condisim {

using Rng = std::mt19937_64;

namespace rng {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for the `index`-th independent stream under a run seed. Streams for
/// distinct (seed, index, tag) triples are decorrelated and do not depend on
/// the order in which they are created.
inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index,
                                 std::uint64_t tag = 0) {
  std::uint64_t h = splitmix64(seed ^ 0x6a09e667f3bcc909ULL);
  h = splitmix64(h ^ (tag * 0xd1b54a32d192ed03ULL));
  return splitmix64(h ^ (index * 0x9e3779b97f4a7c15ULL + 0x243f6a8885a308d3ULL));
}

inline Rng stream(std::uint64_t seed, std::uint64_t index, std::uint64_t tag = 0) {
  return Rng(stream_seed(seed, index, tag));
}

// Stream tags keep the per-purpose streams of one run apart.
enum Tag : std::uint64_t {
  kPrior = 1,
  kSimulate = 2,
  kChain = 3,
  kSbc = 4,
  kTrain = 5,
  kTask = 6,
  kReference = 7,
  kMetric = 8,
};

inline double normal(Rng& g) { return std::normal_distribution<double>(0.0, 1.0)(g); }
inline double uniform(Rng& g, double lo = 0.0, double hi = 1.0) {
  return std::uniform_real_distribution<double>(lo, hi)(g);
}

}  // namespace rng

/// Number of worker threads used by parallel loops; 0 means hardware concurrency.
inline std::size_t& worker_threads() {
  static std::size_t n = 0;
  return n;
}

namespace detail {
inline bool& in_parallel_region() {
  thread_local bool flag = false;
  return flag;
}
}  // namespace detail

/// Runs body(i) for i in [0, n) on up to worker_threads() threads. Results
/// must not depend on scheduling: callers derive per-index RNG streams.
/// Nested calls from inside a worker run serially.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
  std::size_t workers = worker_threads();
  if (workers == 0) workers = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  workers = std::min(workers, n);
  if (workers <= 1 || detail::in_parallel_region()) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      detail::in_parallel_region() = true;
      try {
        for (std::size_t i = w; i < n; i += workers) body(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace condisim
