#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

#include "rectflow/error.hpp"

namespace rectflow {

// Deterministic PRNG used everywhere randomness is needed.
//
// Algorithm (fixed so that splits, init, and sampling are bit-reproducible):
//   * state seeding: four rounds of splitmix64 starting from the seed
//   * stream: xoshiro256** (Blackman/Vigna), rotl(s1*5, 7)*9 output
//   * uniform double in [0,1): (next() >> 11) * 2^-53
//   * bounded integer below n: masked rejection on the low bits
//   * standard normal: Box-Muller on two uniforms, with the spare cached
inline uint64_t splitmix64(uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

class Rng {
 public:
  explicit Rng(uint64_t seed) {
    uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64(sm);
  }

  uint64_t next() {
    const uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform in (lo, hi) halves open at lo only through the [0,1) source.
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, n).
  uint64_t below(uint64_t n) {
    require(n > 0, ErrorKind::domain, "below(0)");
    if (n == 1) return 0;
    uint64_t mask = n - 1;
    mask |= mask >> 1;
    mask |= mask >> 2;
    mask |= mask >> 4;
    mask |= mask >> 8;
    mask |= mask >> 16;
    mask |= mask >> 32;
    uint64_t v;
    do {
      v = next() & mask;
    } while (v >= n);
    return v;
  }

  // Standard normal via Box-Muller; consumes two uniforms per pair of draws.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  uint64_t s_[4]{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Domain-separated seed derivation: one root seed fans out to independent
// subsystem streams. FNV-1a over the tag, mixed into the root through two
// splitmix64 rounds.
inline uint64_t derive_seed(uint64_t root, std::string_view tag, uint64_t index = 0) {
  uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  uint64_t x = root ^ h;
  (void)splitmix64(x);
  x ^= index * 0x9E3779B97F4A7C15ULL;
  return splitmix64(x);
}

}  // namespace rectflow
