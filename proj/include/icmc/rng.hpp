#pragma once

#include <cmath>
#include <cstdint>
#include <random>

// Deterministic random draws. Streams derived from (seed, stream) pairs so
// replicate-level work stays reproducible regardless of thread count.
// Distribution helpers are hand-rolled: the std:: distributions carry hidden
// state and are not bit-stable across library versions.

namespace icmc::rng {

using Engine = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline Engine make_engine(std::uint64_t seed, std::uint64_t stream = 0) {
  return Engine(splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x51ed2701)));
}

// uniform on [0, 1)
inline double uniform(Engine& eng) {
  return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

inline double uniform(Engine& eng, double a, double b) {
  return a + (b - a) * uniform(eng);
}

// uniform on (0, 1), safe as a log or inverse-cdf argument
inline double uniform_pos(Engine& eng) {
  double u;
  do {
    u = uniform(eng);
  } while (u <= 0.0);
  return u;
}

inline bool bernoulli(Engine& eng, double p) { return uniform(eng) < p; }

// Box-Muller; consumes exactly two draws per call
inline double normal(Engine& eng) {
  const double u1 = uniform_pos(eng);
  const double u2 = uniform(eng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
}

inline double exponential(Engine& eng) { return -std::log(uniform_pos(eng)); }

// Marsaglia-Tsang, shape a > 0, unit scale
inline double gamma_shape(Engine& eng, double a) {
  if (a < 1.0) {
    const double u = uniform_pos(eng);
    return gamma_shape(eng, a + 1.0) * std::pow(u, 1.0 / a);
  }
  const double d = a - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal(eng);
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform_pos(eng);
    if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
  }
}

// gamma with mean 1 and variance r; r = 0 degenerates to the point mass at 1
inline double gamma_frailty(Engine& eng, double r) {
  if (r <= 0.0) return 1.0;
  return gamma_shape(eng, 1.0 / r) * r;
}

inline long poisson(Engine& eng, double lambda) {
  if (lambda <= 0.0) return 0;
  if (lambda < 30.0) {
    const double limit = std::exp(-lambda);
    long n = 0;
    double prod = uniform_pos(eng);
    while (prod > limit) {
      ++n;
      prod *= uniform_pos(eng);
    }
    return n;
  }
  // split recursively; keeps every branch in the small-mean regime
  const long half = poisson(eng, lambda / 2.0);
  return half + poisson(eng, lambda - lambda / 2.0);
}

inline std::size_t uniform_index(Engine& eng, std::size_t n) {
  return static_cast<std::size_t>(uniform(eng) * static_cast<double>(n)) % n;
}

}  // namespace icmc::rng
