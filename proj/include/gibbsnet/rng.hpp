#pragma once

#include <cstdint>
#include <random>

namespace gibbsnet {

/// SplitMix64 step. Used both as a stand-alone mixer and to derive
/// independent stream seeds from a single master seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Counter-based seed split: stream k of a master seed.
/// derive(m, k) == splitmix64(m ^ splitmix64(k + 1)), so distinct streams
/// of the same master never collide with the master itself (k+1 != 0).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  return splitmix64(master ^ splitmix64(stream + 1));
}

/// Two-level split for (cell, replicate)-style grids.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b) {
  return derive_seed(derive_seed(master, a), b);
}

inline std::mt19937_64 make_engine(std::uint64_t seed) {
  return std::mt19937_64(seed);
}

}  // namespace gibbsnet
