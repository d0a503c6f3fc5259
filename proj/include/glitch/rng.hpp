#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace glitch {

/// Seeded generator with platform-independent derived distributions.
///
/// std::mt19937_64 output is fully specified by the standard, but the
/// std::*_distribution adaptors are not, so the bounded and real-valued
/// draws are implemented here to keep generated files identical across
/// standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound);

  /// Uniform integer in [lo, hi] (inclusive).
  int uniform_int(int lo, int hi);

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01();

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Standard normal via Box-Muller (one draw per call, no caching).
  double normal();

  std::uint8_t byte() { return static_cast<std::uint8_t>(next_u64() >> 56); }

 private:
  std::mt19937_64 engine_;
};

/// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Derives an independent stream seed: mix64(seed ^ mix64(salt)).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt);

/// Same, salting with a stable 64-bit FNV-1a hash of a tag.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag);

}  // namespace glitch
