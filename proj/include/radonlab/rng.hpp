#pragma once
// Deterministic random streams.  The std distributions are implementation
// defined, so uniforms are derived from raw mt19937_64 output directly;
// every battery in the test surface draws through these helpers.

#include <cstdint>
#include <random>

namespace radonlab {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

struct Rng {
  std::mt19937_64 g;
  explicit Rng(uint64_t seed) : g(splitmix64(seed)) {}
  Rng(uint64_t seed, uint64_t stream) : g(splitmix64(seed ^ splitmix64(stream))) {}

  // uniform in [0,1)
  double u01() { return double(g() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * u01(); }
  int64_t below(int64_t n) { return int64_t(g() % uint64_t(n)); }
  double sign() { return (g() & 1) ? 1.0 : -1.0; }
  double gauss() {
    // Box-Muller on stable uniforms
    double r = u01(), t = u01();
    if (r < 1e-300) r = 1e-300;
    return std::sqrt(-2.0 * std::log(r)) * std::cos(2.0 * M_PI * t);
  }
};

}  // namespace radonlab
