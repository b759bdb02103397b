#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

namespace bevbench {

// splitmix64: the mixing function used for both stream derivation and the
// generator itself, so that seeds derived as hash(dataset_seed, id) are
// stable across platforms and standard-library versions.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t v) {
  return splitmix64(seed ^ (v + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2)));
}

inline std::uint64_t hash_combine(std::uint64_t seed, std::string_view tag) {
  std::uint64_t h = seed;
  for (char c : tag) h = splitmix64(h ^ static_cast<std::uint8_t>(c));
  return h;
}

// Deterministic PRNG with explicitly coded distributions. std::shuffle and
// std::normal_distribution are implementation-defined, which breaks the
// bit-identical reproducibility contract, so everything is spelled out here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(splitmix64(seed ^ 0x6a09e667f3bcc909ULL)) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t x = state_;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Uniform integer in [0, n). Modulo bias is negligible for n << 2^64.
  std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

  int uniform_int(int lo, int hi_inclusive) {
    return lo + static_cast<int>(next_below(static_cast<std::uint64_t>(hi_inclusive - lo + 1)));
  }

  bool bernoulli(double p) { return next_double() < p; }

  // Box-Muller, one value per call (the sine branch is discarded).
  double normal() {
    double u1 = next_double();
    double u2 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
};

}  // namespace bevbench
