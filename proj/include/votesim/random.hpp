#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <initializer_list>
#include <random>
#include <thread>
#include <vector>

namespace votesim {

using Rng = std::mt19937_64;

namespace detail {
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
}  // namespace detail

// Stream tags keep substreams of different stages apart.
enum class Stream : std::uint64_t {
  attributes = 1,
  desirability,
  redistribution,
  mail_in,
  network,
  scoring,
  tie_break,
  noise,
  poll_sample,
  poll_noise,
  fraud_regions,
  fraud_votes,
  kmeans,
};

// Deterministic seed for (master seed, stream, indices...). Independent of
// the order in which substreams are requested.
inline std::uint64_t derive_seed(std::uint64_t master, Stream stream,
                                 std::initializer_list<std::uint64_t> keys = {}) {
  std::uint64_t h = detail::splitmix64(master ^ 0x51ed270b5f1a3c4dULL);
  h = detail::splitmix64(h ^ static_cast<std::uint64_t>(stream));
  for (auto k : keys) h = detail::splitmix64(h ^ detail::splitmix64(k + 0x632be59bd9b4e019ULL));
  return h;
}

inline Rng make_rng(std::uint64_t master, Stream stream,
                    std::initializer_list<std::uint64_t> keys = {}) {
  std::seed_seq seq{static_cast<std::uint32_t>(derive_seed(master, stream, keys)),
                    static_cast<std::uint32_t>(derive_seed(master, stream, keys) >> 32)};
  return Rng(seq);
}

inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Unbiased integer in [0, n).
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(rng);
}

// First `k` entries of the returned vector are a uniform sample without
// replacement from [0, n), in random order.
inline std::vector<std::size_t> sample_without_replacement(Rng& rng, std::size_t n,
                                                           std::size_t k) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  k = std::min(k, n);
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + uniform_index(rng, n - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

// Static-chunked parallel loop. Callers must make every iteration depend only
// on its index so results do not depend on `threads`. The first exception
// thrown by any iteration is rethrown after all workers finish.
template <typename F>
void parallel_for(std::size_t n, unsigned threads, F&& body) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < n; i += threads) body(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace votesim
