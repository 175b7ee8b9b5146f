#pragma once

// Deterministic random streams. The engine is std::mt19937_64; variates are
// derived here rather than through <random> distributions, whose output is
// implementation-defined, so a seed reproduces the same draws on any
// standard library.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace cfdecomp {

using Rng = std::mt19937_64;

// Independent stream `stream` of the master seed `seed`.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32), 0x9e3779b9u};
  return Rng(seq);
}

// Uniform on the open interval (0, 1).
inline double uniform01(Rng& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

// Uniform on {0, ..., n-1}; rejection sampling, no modulo bias.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t r;
  do {
    r = rng();
  } while (r >= limit);
  return r % n;
}

inline double standard_exponential(Rng& rng) {
  return -std::log(uniform01(rng));
}

// Box-Muller, one variate per call.
inline double standard_normal(Rng& rng) {
  const double u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace cfdecomp
