#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

namespace icmc {

enum class KnotPlacement { quantile, even };

// Clamped polynomial spline basis shared by the monotone I-spline expansion of
// the cumulative hazard and the B-spline sieve for the incidence link. The
// basis is immutable after construction; evaluation is pure and reentrant.
//
// With m interior knots and polynomial degree d there are k = m + d I-spline
// functions and k + 1 B-spline functions of degree d. Each I-spline rises from
// 0 at lo to 1 at hi and stays 1 beyond; the B-splines are a partition of
// unity on [lo, hi].
struct SplineBasis {
  int degree = 3;
  Eigen::VectorXd interior_knots;
  double lo = 0.0;
  double hi = 1.0;
  Eigen::Index k = 0;  // number of I-spline basis functions
  std::vector<std::string> warnings;

  Eigen::Index n_bspline() const { return k + 1; }

  // padded knot vector with (degree + 1)-fold boundary knots
  Eigen::VectorXd padded_knots() const;
};

// Basis over observed event-scale times: boundary (0, max(times) * (1 + 1e-9))
// so every data time is interior. Duplicate quantile knots from ties are
// collapsed (recorded in warnings), which reduces k.
SplineBasis make_basis(const std::vector<double>& times, int degree, int n_knots,
                       KnotPlacement placement);

// Basis on an explicit interval; used by the sieve link whose boundary is
// rebuilt on the observed index range for each candidate direction. Quantile
// placement draws knots from `values`.
SplineBasis make_basis_interval(double lo, double hi, const std::vector<double>& values,
                                int degree, int n_knots, KnotPlacement placement);

// t >= 0; component l is the integral of the l-th normalized M-spline from 0
// to t. Componentwise nondecreasing in t, all values in [0, 1].
Eigen::VectorXd eval_ispline(const SplineBasis& basis, double t);

// degree-d B-splines at u, clamped to [lo, hi]; nonnegative, sums to 1
Eigen::VectorXd eval_bspline(const SplineBasis& basis, double u);

}  // namespace icmc
