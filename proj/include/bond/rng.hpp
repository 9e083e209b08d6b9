#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace bond {

/// SplitMix64 finalizer; used to derive child seeds from a parent seed.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Hierarchical seed split: run seed -> step seed -> slot seed.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t a,
                                    std::uint64_t b = 0) {
  return mix64(mix64(parent ^ mix64(a + 1)) ^ mix64(b + 0x51ed27));
}

/// Seeded generator with a portable uniform draw (the standard
/// distributions are implementation-defined, this is not).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix64(seed)) {}

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller on uniform().
  double normal();

  /// Inverse-CDF draw from unnormalized non-negative weights.
  std::size_t categorical(std::span<const double> weights);

  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace bond
