#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "pmq/special_functions.hpp"

namespace pmq {

/// SplitMix64 step. Used both as a generator for seeding and as the mixing
/// function of the splittable stream construction below.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// xoshiro256++ generator. 256-bit state, seeded through SplitMix64 so any
/// 64-bit seed yields a valid (non-zero) state.
class rng_stream {
 public:
  rng_stream() : rng_stream(0) {}

  explicit rng_stream(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : state_) word = splitmix64_next(sm);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1), 53 random bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // UniformRandomBitGenerator interface
  using result_type = std::uint64_t;
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }
  result_type operator()() { return next_u64(); }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::uint64_t state_[4];
};

/// Splittable stream derivation: the stream seed is a SplitMix64 hash chain
/// absorbing (master_seed, a, b, c). Streams for distinct index tuples are
/// statistically independent, and the construction is stable across runs,
/// platforms and thread counts.
inline rng_stream substream(std::uint64_t master_seed, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t h = master_seed;
  for (std::uint64_t w : {a, b, c}) {
    std::uint64_t t = w;
    h ^= splitmix64_next(t);
    (void)splitmix64_next(h);
    h += 0x9E3779B97F4A7C15ULL;
  }
  return rng_stream(h);
}

namespace detail {

// Sequential search by cumulative products of uniforms; O(t) draws.
inline std::uint64_t poisson_small(double t, rng_stream& rng) {
  const double limit = std::exp(-t);
  std::uint64_t k = 0;
  double prod = rng.next_double();
  while (prod > limit) {
    ++k;
    prod *= rng.next_double();
  }
  return k;
}

// Hoermann's PTRS transformed-rejection sampler, exact for t >= 10.
inline std::uint64_t poisson_ptrs(double t, rng_stream& rng) {
  const double log_t = std::log(t);
  const double b = 0.931 + 2.53 * std::sqrt(t);
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double v_r = 0.9277 - 3.6224 / (b - 2.0);
  for (;;) {
    const double u0 = rng.next_double() - 0.5;
    const double v = rng.next_double();
    const double us = 0.5 - std::abs(u0);
    const double k = std::floor((2.0 * a / us + b) * u0 + t + 0.43);
    if (us >= 0.07 && v <= v_r) return static_cast<std::uint64_t>(k);
    if (k < 0.0 || (us < 0.013 && v > us)) continue;
    if (std::log(v * inv_alpha / (a / (us * us) + b)) <= k * log_t - t - log_gamma(k + 1.0))
      return static_cast<std::uint64_t>(k);
  }
}

}  // namespace detail

/// One Poisson(t) draw. Self-contained so results are reproducible independent
/// of the standard library implementation.
inline std::uint64_t poisson_draw(double t, rng_stream& rng) {
  if (!(t > 0.0)) throw std::domain_error("poisson_draw: t must be > 0");
  return t < 30.0 ? detail::poisson_small(t, rng) : detail::poisson_ptrs(t, rng);
}

}  // namespace pmq
