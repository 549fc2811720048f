#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <string_view>

namespace ratelab {

using Rng = std::mt19937_64;

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Seed of the named substream `name`/`index` under `root`. Substreams with
/// different names are statistically independent, so adding a consumer never
/// shifts the draws another consumer sees.
inline constexpr std::uint64_t derive_seed(std::uint64_t root, std::string_view name,
                                           std::uint64_t index = 0) noexcept {
  return splitmix64(splitmix64(root ^ fnv1a64(name)) + splitmix64(index + 0x5851f42d4c957f2dULL));
}

inline Rng substream(std::uint64_t root, std::string_view name, std::uint64_t index = 0) {
  return Rng{derive_seed(root, name, index)};
}

// Uniform integer in [0, n), n > 0. Modulo with rejection of the short
// bottom slice; independent of the standard library's distribution internals.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  static_assert(Rng::min() == 0 && Rng::max() == ~std::uint64_t{0});
  const std::uint64_t threshold = (0 - n) % n;  // 2^64 mod n
  std::uint64_t x;
  do {
    x = rng();
  } while (x < threshold);
  return x % n;
}

template <class RandomIt>
void shuffle(RandomIt first, RandomIt last, Rng& rng) {
  const auto n = static_cast<std::uint64_t>(last - first);
  for (std::uint64_t i = n; i > 1; --i) {
    const auto j = uniform_index(rng, i);
    std::iter_swap(first + (i - 1), first + j);
  }
}

/// Uniform real in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double standard_normal(Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  return dist(rng);
}

}  // namespace ratelab
