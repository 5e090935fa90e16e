#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace pmc {

using Rng = std::mt19937_64;

// SplitMix64 finalizer. Sub-seeds are derived as splitmix(master ^ splitmix(stream + 1)),
// which keeps streams for different replication indices decorrelated.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) noexcept {
  return splitmix64(master ^ splitmix64(stream + 1));
}

// Uniform on the open interval (0, 1); never returns an endpoint.
inline double uniform_open(Rng& rng) {
  // 53 random bits, shifted off zero by half an ulp of the grid.
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform_open(rng); }

// Standard normal via Box-Muller on open uniforms (platform independent, unlike
// std::normal_distribution).
inline double standard_normal(Rng& rng) {
  const double u1 = uniform_open(rng);
  const double u2 = uniform_open(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

// Type-I extreme value (Gumbel(0,1)) by inverse CDF.
inline double gumbel(Rng& rng) { return -std::log(-std::log(uniform_open(rng))); }

}  // namespace pmc
