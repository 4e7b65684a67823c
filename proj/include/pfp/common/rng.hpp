// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace pfp {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Derives an independent child seed from (seed, tag). Used to give every
// component (init, shuffling, per-session streams, ...) its own stream so
// adding a consumer never shifts another consumer's draws.
inline uint64_t derive_seed(uint64_t seed, std::string_view tag) {
  uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a over the tag
  for (unsigned char c : tag) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return splitmix64(seed ^ splitmix64(h));
}

inline uint64_t derive_seed(uint64_t seed, std::string_view tag, uint64_t a) {
  return splitmix64(derive_seed(seed, tag) ^ splitmix64(a + 0x9e37ull));
}

inline uint64_t derive_seed(uint64_t seed, uint64_t a) { return splitmix64(seed ^ splitmix64(a + 0x9e37ull)); }

inline uint64_t derive_seed(uint64_t seed, uint64_t a, uint64_t b) {
  return splitmix64(derive_seed(seed, a) ^ splitmix64(b + 0x85ebca6bull));
}

inline uint64_t derive_seed(uint64_t seed, uint64_t a, uint64_t b, uint64_t c) {
  return splitmix64(derive_seed(seed, a, b) ^ splitmix64(c + 0xc2b2ae35ull));
}

// Deterministic RNG: mersenne-twister bit stream (fully specified by the
// standard) with hand-rolled float/int conversions, so sequences are stable
// across standard-library implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  // [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Inclusive [lo, hi]; fixed single draw per call.
  int64_t uniform_int(int64_t lo, int64_t hi) {
    uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    uint64_t r = static_cast<uint64_t>((static_cast<__uint128_t>(next_u64()) * span) >> 64);
    return lo + static_cast<int64_t>(r);
  }

  // Box-Muller without a cached spare: always two draws per call.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double normal(double mean, double sigma) { return mean + sigma * normal(); }

  // Parameterized by the median: exp(ln(median) + sigma * N(0,1)).
  double lognormal(double median, double sigma) { return median * std::exp(sigma * normal()); }

  // Knuth's method; fine for the small means used here.
  int64_t poisson(double mean) {
    if (mean <= 0.0) return 0;
    double limit = std::exp(-mean);
    double prod = uniform();
    int64_t n = 0;
    while (prod > limit && n < 10000) {
      ++n;
      prod *= uniform();
    }
    return n;
  }

  // Index into weights proportional to weight; total must be positive.
  size_t weighted_choice(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    double r = uniform() * total;
    double acc = 0.0;
    for (size_t i = 0; i < weights.size(); ++i) {
      acc += weights[i];
      if (r < acc) return i;
    }
    return weights.size() - 1;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(uniform_int(0, static_cast<int64_t>(i) - 1));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace pfp
