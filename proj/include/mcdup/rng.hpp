#pragma once

// Counter-based random streams.
//
// A stream is a 64-bit key. Draw i of a stream is the i-th SplitMix64 output
// seeded with that key:
//
//   z = key + (i + 1) * 0x9E3779B97F4A7C15
//   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//   z =  z ^ (z >> 31)
//
// Child streams are derived by mixing the parent key with a label (FNV-1a 64
// of the label bytes) or an integer index. Draws are pure functions of
// (key, index), so results never depend on the order in which other streams
// are consumed. The algorithm is fixed; changing it changes every emulated
// result.

#include <cstdint>
#include <string_view>

namespace mcdup {

inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : text) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

class RngStream {
 public:
  constexpr RngStream() = default;
  constexpr explicit RngStream(std::uint64_t key) : key_(key) {}

  static constexpr RngStream from_seed(std::uint64_t seed) { return RngStream(mix64(seed ^ 0x6D63647570ULL)); }

  constexpr RngStream split(std::string_view label) const { return RngStream(mix64(key_ ^ mix64(fnv1a64(label)))); }
  constexpr RngStream split(std::uint64_t index) const {
    return RngStream(mix64(key_ + mix64(index + 0x2545F4914F6CDD1DULL)));
  }

  constexpr std::uint64_t bits(std::uint64_t index) const {
    return mix64(key_ + (index + 1) * 0x9E3779B97F4A7C15ULL);
  }

  // Uniform in [0, 1) with 53 bits of resolution.
  constexpr double uniform(std::uint64_t index) const {
    return static_cast<double>(bits(index) >> 11) * 0x1.0p-53;
  }

  // Uniform in (0, 1]; safe under log().
  constexpr double uniform_open_low(std::uint64_t index) const {
    return static_cast<double>((bits(index) >> 11) + 1) * 0x1.0p-53;
  }

  constexpr std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_ = 0;
};

// Sequential view over a stream, for code that just wants "the next number".
class RngCursor {
 public:
  explicit RngCursor(RngStream stream) : stream_(stream) {}
  std::uint64_t next_bits() { return stream_.bits(index_++); }
  double next_uniform() { return stream_.uniform(index_++); }
  double next_normal();

 private:
  RngStream stream_;
  std::uint64_t index_ = 0;
};

// Standard normal from two uniforms (Box-Muller, cosine branch).
double standard_normal(double u_open_low, double u);

}  // namespace mcdup
