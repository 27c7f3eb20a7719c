#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <string_view>

namespace phaseopt {

using Rng = std::mt19937_64;

// splitmix64 finalizer, used to spread one master seed into independent
// named streams so adding a new consumer never shifts an existing one.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::string_view stream) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : stream) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return mix64(master ^ h);
}

inline Rng make_rng(std::uint64_t master, std::string_view stream) {
  return Rng(derive_seed(master, stream));
}

// Uniform draw in [lo, hi]. Hand-rolled so results do not depend on the
// standard library's distribution implementation.
inline long long uniform_int(Rng& rng, long long lo, long long hi) {
  const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
  const std::uint64_t bucket = std::numeric_limits<std::uint64_t>::max() / span;
  const std::uint64_t limit = bucket * span;
  std::uint64_t r;
  do {
    r = rng();
  } while (r >= limit);
  return lo + static_cast<long long>(r / bucket);
}

// Uniform in [0, 1) with 53 random bits.
inline double uniform_real01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace phaseopt
