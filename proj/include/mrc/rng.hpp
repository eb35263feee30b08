// rng.hpp
//
// Deterministic random number generation for the whole pipeline.
// std::mt19937 + distributions are implementation-defined across platforms,
// so everything here is hand-rolled: splitmix64 for seeding/stream derivation,
// xoshiro256** as the workhorse generator. Identical seeds give identical
// streams on every platform, which the dataset/report reproducibility
// contracts rely on.

#pragma once

#include <cstdint>
#include <cmath>
#include <string_view>

namespace mrc {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) { reseed(seed); }

  void reseed(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64(sm);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // uniform in [0, 1): 53-bit mantissa
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // fair coin; +1 / -1
  int rademacher() { return (next_u64() >> 63) ? 1 : -1; }

  // standard normal via Box-Muller (no cached spare: keeps the stream
  // position a pure function of the number of calls)
  double normal() {
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::uint64_t s_[4];
};

// Named sub-stream derivation: one master seed fans out into independent
// per-purpose streams ("scenario", "sigma", "train3", ...). FNV-1a over the
// label mixed with the master seed through splitmix64.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view label) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const char c : label) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 1099511628211ULL;
  }
  std::uint64_t st = master ^ h;
  std::uint64_t out = splitmix64(st);
  out = splitmix64(st) ^ out;
  return out;
}

}  // namespace mrc
