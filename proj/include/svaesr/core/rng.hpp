#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

namespace svaesr {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; decorrelates seeds that differ in a few bits.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Child seed for an independent stream identified by a path of integers,
/// e.g. derive_seed(run_seed, {iteration, sample, purpose}).
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = mix64(seed);
  for (std::uint64_t p : path) s = mix64(s ^ mix64(p + 0x632BE59BD9B4E019ULL));
  return s;
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return derive_seed(seed, {stream});
}

/// Standard normal draw with a fixed algorithm (Box-Muller on 53-bit uniforms),
/// so sequences do not depend on the standard library's distribution code.
inline double standard_normal(Rng& rng) {
  constexpr double kInv53 = 1.0 / 9007199254740992.0;
  const double u1 = (static_cast<double>(rng() >> 11) + 0.5) * kInv53;
  const double u2 = static_cast<double>(rng() >> 11) * kInv53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

/// Uniform double in [0, 1).
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

/// Uniform integer in [0, n) by rejection, independent of library distributions.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit = ~0ULL - (~0ULL % n);
  std::uint64_t r;
  do r = rng(); while (r >= limit);
  return r % n;
}

/// n distinct values of [0, available), uniformly, by a partial Fisher-Yates shuffle.
inline std::vector<int> draw_distinct(std::size_t available, std::size_t n, Rng& rng) {
  std::vector<int> pool(available);
  std::iota(pool.begin(), pool.end(), 0);
  for (std::size_t i = 0; i < n; ++i) std::swap(pool[i], pool[i + uniform_index(rng, available - i)]);
  pool.resize(n);
  return pool;
}

}  // namespace svaesr
