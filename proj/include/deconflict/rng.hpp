#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace deconflict {

/// 64-bit Mersenne Twister. Its output sequence is fixed by the standard, so
/// runs are reproducible across toolchains as long as we avoid the
/// implementation-defined std:: distributions.
using Rng = std::mt19937_64;

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Derives an independent sub-seed from a base seed and a path of stream tags,
/// e.g. derive_seed(seed, {kStreamSpawn, episode}).
inline uint64_t derive_seed(uint64_t base, std::initializer_list<uint64_t> path) {
  uint64_t h = splitmix64(base);
  for (uint64_t p : path) h = splitmix64(h ^ splitmix64(p + 0x632BE59BD9B4E019ULL));
  return h;
}

// Stream tags for derive_seed.
inline constexpr uint64_t kStreamSpawn = 1;
inline constexpr uint64_t kStreamInit = 2;
inline constexpr uint64_t kStreamActions = 3;
inline constexpr uint64_t kStreamShuffle = 4;

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Uniform integer in [0, n), n > 0. Uses rejection to stay unbiased.
inline uint64_t uniform_index(Rng& rng, uint64_t n) {
  const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  uint64_t r;
  do {
    r = rng();
  } while (r >= limit);
  return r % n;
}

/// Fisher-Yates with uniform_index, portable unlike std::shuffle.
template <typename Vec>
void shuffle(Vec& v, Rng& rng) {
  for (size_t i = v.size(); i > 1; --i) {
    size_t j = uniform_index(rng, i);
    using std::swap;
    swap(v[i - 1], v[j]);
  }
}

}  // namespace deconflict
