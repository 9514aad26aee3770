#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace airware {

/// SplitMix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t task) {
  return mix64(mix64(seed) ^ mix64(task + 0x632BE59BD9B4E019ull));
}

/// Seeded generator. Streams for parallel work are obtained with `split`, so
/// results never depend on scheduling.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(mix64(seed)) {}

  Rng split(std::uint64_t task) const { return Rng(derive_seed(seed_, task)); }
  std::uint64_t seed() const { return seed_; }

  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  // Inclusive on both ends.
  long uniform_int(long lo, long hi) { return std::uniform_int_distribution<long>(lo, hi)(engine_); }
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(uniform_int(0, static_cast<long>(n) - 1)); }
  double normal(double mean = 0.0, double stddev = 1.0) {
    return std::normal_distribution<double>(mean, stddev)(engine_);
  }
  bool bernoulli(double p) { return uniform() < p; }

  template <typename It>
  void shuffle(It first, It last) {
    // Fisher-Yates with our own index draws keeps the order stable across
    // standard library implementations of std::shuffle.
    const auto n = static_cast<long>(last - first);
    for (long i = n - 1; i > 0; --i) std::iter_swap(first + i, first + uniform_int(0, i));
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace airware
