#pragma once
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace tripath::sim {

/// SplitMix64 finalizer (Steele, Lea & Flood 2014). Used only to derive
/// independent child seeds; it is a bijection on 64-bit integers.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Child seed for a position in a batch, e.g. derive_seed(base, {point, run, leg}).
/// seed_k = splitmix64(seed_{k-1} ^ splitmix64(index_k)), seed_0 = base.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = base;
  for (std::uint64_t i : path) s = splitmix64(s ^ splitmix64(i));
  return s;
}

/// MT19937-64 stream with distribution transforms written out here so that
/// results do not depend on the standard library's distribution code.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Exponential with the given rate (> 0), by inversion.
  double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

  bool bernoulli(double p) { return uniform() < p; }

  /// Uniform integer in [0, n) by rejection (n > 0).
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do x = engine_();
    while (x >= limit);
    return x % n;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace tripath::sim
