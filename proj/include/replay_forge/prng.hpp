#pragma once

#include <cstdint>
#include <string_view>
#include <utility>

namespace rforge {

/// One SplitMix64 step: advances `state` by the golden-gamma increment and
/// returns the mixed output together with the new state.
constexpr std::pair<std::uint64_t, std::uint64_t> splitmix64_next(std::uint64_t state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return {z ^ (z >> 31), state};
}

/// Deterministic PRNG used everywhere randomness is needed. The stream is a
/// pure function of the seed and identical on every platform.
class SplitMix64 {
 public:
  explicit constexpr SplitMix64(std::uint64_t seed) : state_(seed) {}

  constexpr std::uint64_t next() {
    auto [value, state] = splitmix64_next(state_);
    state_ = state;
    return value;
  }

  /// Unbiased draw in [0, bound). bound must be nonzero.
  std::uint64_t bounded(std::uint64_t bound) {
    // Lemire's multiply-shift with rejection.
    std::uint64_t x = next();
    __uint128_t m = static_cast<__uint128_t>(x) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
      std::uint64_t threshold = (0ULL - bound) % bound;
      while (low < threshold) {
        x = next();
        m = static_cast<__uint128_t>(x) * bound;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  /// Uniform double in [0, 1).
  double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  constexpr std::uint64_t state() const { return state_; }

 private:
  std::uint64_t state_;
};

/// Single mixing step applied to a raw 64-bit value.
constexpr std::uint64_t splitmix64_mix(std::uint64_t x) { return splitmix64_next(x).first; }

constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

/// Derives an independent PRNG seed from (seed, tag, a, b). Used to give every
/// sample/epoch its own stream so parallel and serial processing agree.
constexpr std::uint64_t derive_stream(std::uint64_t seed, std::string_view tag,
                                      std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t h = splitmix64_mix(seed ^ fnv1a64(tag));
  h = splitmix64_mix(h ^ a);
  h = splitmix64_mix(h ^ b);
  return h;
}

}  // namespace rforge
