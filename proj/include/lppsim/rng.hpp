#pragma once

// Counter-based random streams. A value is a pure function of
// (seed, stream, index), so arbitrary sub-ranges can be generated in any
// order and windows can grow without disturbing values already drawn.

#include <cstdint>

namespace lpp::rng {

inline constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

enum class Stream : std::uint64_t {
  spatial = 1,
  signs = 2,
  replica = 3,
  pairs = 4,
  bootstrap = 5,
};

inline constexpr std::uint64_t key(std::uint64_t seed, Stream s) noexcept {
  return mix64(seed ^ mix64(static_cast<std::uint64_t>(s) * 0xD1B54A32D192ED03ULL));
}

inline constexpr std::uint64_t bits(std::uint64_t stream_key, std::int64_t index) noexcept {
  return mix64(stream_key ^ mix64(static_cast<std::uint64_t>(index) + 0x632BE59BD9B4E019ULL));
}

/// Uniform on the open interval (0,1) with 52 random bits; the largest value
/// is 1 - 2^-53, which a 53-bit grid plus half a step would round up to 1.
inline constexpr double open_unit(std::uint64_t b) noexcept {
  return (static_cast<double>(b >> 12) + 0.5) * 0x1.0p-52;
}

/// Seed for replica `r` of an experiment with master seed `master`.
inline constexpr std::uint64_t replica_seed(std::uint64_t master, std::uint64_t r) noexcept {
  return bits(key(master, Stream::replica), static_cast<std::int64_t>(r));
}

/// A tiny sequential engine (SplitMix64) satisfying UniformRandomBitGenerator,
/// for bootstrap resampling and other order-dependent draws.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;
  explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}
  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~result_type{0}; }
  constexpr result_type operator()() noexcept {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

}  // namespace lpp::rng
