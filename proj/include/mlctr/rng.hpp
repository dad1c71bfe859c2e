#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace mlctr {

// All randomness flows through the helpers below.  std::shuffle and the
// standard distributions are implementation-defined, so seeded runs would
// not reproduce across standard libraries; the raw mt19937_64 stream does.

// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Unbiased integer in [0, n) by rejection.
inline std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t limit = std::mt19937_64::max() - std::mt19937_64::max() % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

// Standard normal variate (Box-Muller, one variate per call so the
// number of engine draws per sample is fixed).
inline double gaussian(std::mt19937_64& rng) {
  constexpr double two_pi = 6.283185307179586476925286766559;
  double u1;
  do {
    u1 = uniform01(rng);
  } while (u1 <= 0.0);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

// Fisher-Yates shuffle driven by uniform_index.
template <typename T>
void shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(uniform_index(rng, i));
    std::swap(v[i - 1], v[j]);
  }
}

// Random permutation of 0..n-1.
inline std::vector<std::size_t> permutation(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  shuffle(idx, rng);
  return idx;
}

}  // namespace mlctr
