#pragma once

#include <cstdint>
#include <random>

namespace lectio::detail {

// mt19937_64's output sequence is fixed by the standard; the helpers below
// avoid the implementation-defined std distributions so seeded runs match
// across standard libraries.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Unbiased integer in [0, n) by rejection.
inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x = rng();
  while (x >= limit) x = rng();
  return x % n;
}

}  // namespace lectio::detail
