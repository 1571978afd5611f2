#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace gwspine {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed of replica `index` under `master_seed`.
///
/// The rule is fixed so that a replica's stream depends only on
/// (master_seed, index), never on which worker ran it:
///   seed_i = splitmix64(splitmix64(master_seed) ^ (index * 0xD1B54A32D192ED03))
inline std::uint64_t replica_seed(std::uint64_t master_seed, std::uint64_t index) {
  return splitmix64(splitmix64(master_seed) ^ (index * 0xD1B54A32D192ED03ULL));
}

inline Rng replica_stream(std::uint64_t master_seed, std::uint64_t index) {
  return Rng(replica_seed(master_seed, index));
}

/// Uniform on [0, 1) with 53 random bits; independent of the standard
/// library's distribution implementation.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n).
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t r = rng();
  while (r >= limit) r = rng();
  return r % n;
}

}  // namespace gwspine
