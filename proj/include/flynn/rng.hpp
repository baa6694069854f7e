#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numbers>

#include "flynn/error.hpp"

namespace flynn {

namespace detail {

// SplitMix64 (Steele, Lea & Flood). Used to expand a 64-bit seed into the
// xoshiro state and to derive independent substream seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t rotl64(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

}  // namespace detail

// Deterministic 64-bit generator: xoshiro256++ (Blackman & Vigna), seeded
// through SplitMix64. The integer stream depends only on the seed, never on
// the platform, so every federation party reproduces the same draws. All
// derived samplers below consume the stream in a fixed documented order.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), position_(0) {
    std::uint64_t sm = seed;
    for (auto& word : state_) word = detail::splitmix64(sm);
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t position() const { return position_; }

  std::uint64_t next_u64() {
    const std::uint64_t result =
        detail::rotl64(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = detail::rotl64(state_[3], 45);
    ++position_;
    return result;
  }

  // Unbiased draw from [0, n) via masked rejection.
  std::uint64_t next_below(std::uint64_t n) {
    if (n == 0) throw InternalError("Rng::next_below: n must be positive");
    if (n == 1) return 0;
    std::uint64_t mask = ~std::uint64_t{0} >> std::countl_zero(n - 1);
    std::uint64_t draw;
    do {
      draw = next_u64() & mask;
    } while (draw >= n);
    return draw;
  }

  // Uniform in [0, 1), 53-bit resolution.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform in (0, 1]; safe as a log() argument.
  double next_double_pos() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; consumes two draws per pair, caches the
  // second value.
  double next_normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = next_double_pos();
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // Seed for an independent substream, derived from (seed, tag) only. Tags
  // are fixed constants per use site (lifting matrix, projection, shuffles,
  // per-party noise) so streams never overlap by construction.
  std::uint64_t substream_seed(std::uint64_t tag) const {
    std::uint64_t sm = seed_ ^ (0xA0761D6478BD642FULL + tag * 0xE7037ED1A0B428DBULL);
    return detail::splitmix64(sm);
  }

  Rng substream(std::uint64_t tag) const { return Rng(substream_seed(tag)); }

 private:
  std::array<std::uint64_t, 4> state_{};
  std::uint64_t seed_;
  std::uint64_t position_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Well-known substream tags.
namespace rng_tag {
inline constexpr std::uint64_t kLiftingMatrix = 1;
inline constexpr std::uint64_t kSimProjection = 2;
inline constexpr std::uint64_t kSynthData = 3;
inline constexpr std::uint64_t kShuffle = 4;
inline constexpr std::uint64_t kDpNoise = 5;
inline constexpr std::uint64_t kGrid = 6;
inline constexpr std::uint64_t kFederation = 7;
}  // namespace rng_tag

}  // namespace flynn
