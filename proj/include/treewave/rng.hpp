#pragma once

#include <cstdint>
#include <random>

namespace treewave {

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace detail

/// Seed of the stream owned by replicate (or chunk, chain, batch) `index`
/// of a run started from `master`. Streams depend only on the pair, never on
/// the order in which workers pick up work.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return detail::splitmix64(detail::splitmix64(master) ^ detail::splitmix64(index + 0x632BE59BD9B4E019ull));
}

/// A random stream: one engine plus the distributions drawn from it.
/// Not thread-safe; give every worker its own stream.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}
  RandomStream(std::uint64_t master, std::uint64_t index) : engine_(derive_seed(master, index)) {}

  double normal() { return normal_(engine_); }

  // Uniform on the open interval (0, 1).
  double uniform_open() {
    double u;
    do {
      u = uniform_(engine_);
    } while (u == 0.0);
    return u;
  }

  std::size_t index_below(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace treewave
