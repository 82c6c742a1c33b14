#pragma once

#include <cstdint>

namespace distla {

/// SplitMix64 (Steele, Lea, Flood 2014).  Reference constants, so every
/// implementation produces the same stream for the same seed.
class SplitMix64 {
public:
  explicit constexpr SplitMix64(std::uint64_t seed) : state_(seed) {}

  constexpr std::uint64_t next() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix(state_);
  }

  /// Uniform double in [-1, 1) with 53 random bits.
  constexpr double uniform() { return to_unit_interval(next()); }

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  static constexpr double to_unit_interval(std::uint64_t bits) {
    return static_cast<double>(bits >> 11) * 0x1.0p-52 - 1.0;
  }

private:
  std::uint64_t state_;
};

/// Counter-based draw for global element (i, j): depends on (seed, i, j)
/// only, never on the matrix shape or how it is distributed.
constexpr double element_uniform(std::uint64_t seed, std::int64_t i,
                                 std::int64_t j) {
  std::uint64_t z = SplitMix64::mix(
      seed + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(i) + 1));
  z = SplitMix64::mix(
      z ^ (0xD1B54A32D192ED03ULL * (static_cast<std::uint64_t>(j) + 1)));
  return SplitMix64::to_unit_interval(z);
}

} // namespace distla
