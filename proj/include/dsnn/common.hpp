#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace dsnn {

// Everything user-facing derives from Error so the CLI can catch one type.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : Error { using Error::Error; };
struct DimensionError : Error { using Error::Error; };
struct NumericError : Error { using Error::Error; };
struct FormatError : Error { using Error::Error; };
struct StateError : Error { using Error::Error; };
struct KernelDegenerateError : Error { using Error::Error; };
struct GrowthExhaustedError : Error { using Error::Error; };
struct DegenerateFieldError : Error { using Error::Error; };

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent deterministic stream per (seed, tag). Same pair, same stream.
inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t tag) {
  return std::mt19937_64(splitmix64(splitmix64(seed) ^ tag));
}

// Uniform double in [0, 1). Hand-rolled so draws do not depend on the
// standard library's distribution internals.
inline double uniform01(std::mt19937_64& rng) {
  return double(rng() >> 11) * 0x1.0p-53;
}

// Standard normal via Box-Muller, one draw per call.
inline double normal01(std::mt19937_64& rng) {
  double u1 = uniform01(rng);
  double u2 = uniform01(rng);
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

// Round half to even: 0.5 -> 0, 1.5 -> 2, 3.4 -> 3.
inline long round_half_even(double x) {
  double f = std::floor(x);
  double frac = x - f;
  if (frac > 0.5) return long(f) + 1;
  if (frac < 0.5) return long(f);
  return (std::fmod(f, 2.0) == 0.0) ? long(f) : long(f) + 1;
}

}  // namespace dsnn
