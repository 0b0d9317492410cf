#pragma once

// Counter-based SplitMix64 streams.
//
// A stream is a 64-bit key. Its i-th output (i = 0, 1, ...) is
//
//     mix64(key + (i + 1) * kGolden)
//
// where mix64 is the SplitMix64 finalizer (xor-shift 30, multiply
// 0xBF58476D1CE4E5B9, xor-shift 27, multiply 0x94D049BB133111EB, xor-shift
// 31). Child streams are keyed by
//
//     child(key, index) = mix64(mix64(key ^ kChildSalt) + (index + 1) * kGolden)
//
// so the content of any substream depends only on its path from the root
// seed, never on how many values sibling streams consumed.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace mgb {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
inline constexpr std::uint64_t kChildSalt = 0xD1B54A32D192ED03ULL;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t stream_output(std::uint64_t key, std::uint64_t counter) noexcept {
  return mix64(key + (counter + 1) * kGolden);
}

constexpr std::uint64_t child_key(std::uint64_t key, std::uint64_t index) noexcept {
  return mix64(mix64(key ^ kChildSalt) + (index + 1) * kGolden);
}

class Stream {
 public:
  explicit constexpr Stream(std::uint64_t key) noexcept : key_(key) {}

  constexpr std::uint64_t key() const noexcept { return key_; }
  constexpr std::uint64_t position() const noexcept { return counter_; }
  constexpr Stream child(std::uint64_t index) const noexcept {
    return Stream(child_key(key_, index));
  }

  constexpr std::uint64_t next_u64() noexcept { return stream_output(key_, counter_++); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  /// Standard normal, Box-Muller cosine branch (consumes two outputs).
  double normal() noexcept {
    const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace mgb
