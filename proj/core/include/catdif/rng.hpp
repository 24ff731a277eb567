#pragma once

#include <cstdint>
#include <random>

namespace catdif {

/// splitmix64 step; used to derive well-mixed seeds from small integers.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Stable seed for (base, cell, replication) triples. Order matters.
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t cell,
                              std::uint64_t replication) {
  std::uint64_t s = base;
  std::uint64_t h = splitmix64(s);
  s ^= cell * 0x9e3779b97f4a7c15ULL;
  h ^= splitmix64(s);
  s ^= replication * 0xc2b2ae3d27d4eb4fULL;
  h ^= splitmix64(s);
  return h;
}

using Rng = std::mt19937_64;

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline double normal(Rng& rng, double mean = 0.0, double sd = 1.0) {
  return std::normal_distribution<double>(mean, sd)(rng);
}

/// Rejection sampler; bounds are assumed loose enough that acceptance is high.
inline double truncated_normal(Rng& rng, double mean, double sd, double lo,
                               double hi) {
  for (;;) {
    double x = normal(rng, mean, sd);
    if (x >= lo && x <= hi) return x;
  }
}

}  // namespace catdif
