#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace crsfd {

// splitmix64 finalizer. Used to derive independent stream seeds from one
// root seed so that consumers (env, action sampling, eval, init) don't
// share a generator position.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  return std::mt19937_64(mix64(seed ^ mix64(stream + 0x51ed2701)));
}

// Uniform double in [0, 1). Fixed bit recipe, not std::uniform_real_distribution,
// so byte-identical outputs don't depend on the standard library.
inline double rand_double(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform int in [0, n). Modulo bias is negligible for the small n used here.
inline int rand_int(std::mt19937_64& rng, int n) {
  return static_cast<int>(rng() % static_cast<std::uint64_t>(n));
}

// Standard normal via Box-Muller (again: fixed recipe for reproducibility).
inline double rand_normal(std::mt19937_64& rng) {
  double u1 = rand_double(rng);
  while (u1 <= 0.0) u1 = rand_double(rng);
  const double u2 = rand_double(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

// Sample an index from an (approximately normalized) probability vector.
// Falls back to the last index on accumulated rounding slack.
inline int rand_categorical(std::mt19937_64& rng, const std::vector<double>& probs) {
  const double u = rand_double(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size()) - 1;
}

}  // namespace crsfd
