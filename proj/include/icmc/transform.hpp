#pragma once

#include <cmath>
#include <stdexcept>

namespace icmc {

// Logarithmic transformation family G(x) = log(1 + r x) / r induced by a
// gamma frailty with mean 1 and variance r. r = 0 is the exact proportional
// hazards limit (its own branch, not a small-r approximation); r = 1 gives
// proportional odds.
struct Transformation {
  double r = 0.0;

  explicit Transformation(double r_in = 0.0) : r(r_in) {
    if (!(r >= 0.0) || !std::isfinite(r)) {
      throw std::invalid_argument("transformation index r must be finite and >= 0");
    }
  }
};

inline double g_of(const Transformation& tr, double x) {
  if (x < 0.0) throw std::domain_error("g_of: argument must be nonnegative");
  if (tr.r == 0.0) return x;
  return std::log1p(tr.r * x) / tr.r;
}

// G'(x) = 1 / (1 + r x); equals 1 at x = 0 for every r
inline double g_prime(const Transformation& tr, double x) {
  return 1.0 / (1.0 + tr.r * x);
}

// inverse of G; y >= 0
inline double g_inverse(const Transformation& tr, double y) {
  if (tr.r == 0.0) return y;
  return std::expm1(tr.r * y) / tr.r;
}

// E(xi) = 1 by construction of the frailty density
inline double frailty_mean(const Transformation&) { return 1.0; }

// Laplace transform of the frailty: E[exp(-x xi)] = exp(-G(x))
inline double laplace(const Transformation& tr, double x) {
  return std::exp(-g_of(tr, x));
}

// S_u(t | Z) = exp[-G{exp(beta.z) Lambda(t)}] with eta_dot_b = Lambda(t)
inline double survival_u(const Transformation& tr, double eta_dot_b, double beta_dot_z) {
  const double x = std::exp(beta_dot_z) * eta_dot_b;
  return laplace(tr, x);
}

}  // namespace icmc
