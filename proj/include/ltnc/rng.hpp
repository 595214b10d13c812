#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace ltnc {

// mt19937_64 produces the same stream on every conforming implementation.
// The transforms below avoid std::*_distribution, whose output is
// implementation-defined, so whole training runs stay bit-reproducible
// across compilers.
using Rng = std::mt19937_64;

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_in(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

/// Standard normal via Box-Muller. u1 is kept in (0, 1] so the log is finite.
inline double normal01(Rng& rng) {
  const double two_pi = 6.28318530717958647692528676655900577;
  double u1 = 1.0 - uniform01(rng);
  double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

/// Uniform index in [0, n). Modulo bias is negligible for n << 2^64.
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return static_cast<std::size_t>(rng() % static_cast<std::uint64_t>(n));
}

/// Uniform sample of k distinct elements, order randomized (partial Fisher-Yates).
template <typename T>
std::vector<T> sample_without_replacement(const std::vector<T>& pool, std::size_t k, Rng& rng) {
  std::vector<T> items = pool;
  if (k > items.size()) k = items.size();
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t j = i + uniform_index(rng, items.size() - i);
    std::swap(items[i], items[j]);
  }
  items.resize(k);
  return items;
}

template <typename T>
void shuffle_in_place(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = 0; i + 1 < items.size(); ++i) {
    std::size_t j = i + uniform_index(rng, items.size() - i);
    std::swap(items[i], items[j]);
  }
}

}  // namespace ltnc
