#include "icmc/splines.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "icmc/numeric.hpp"

namespace icmc {

namespace {

// dense Cox-de Boor evaluation on the padded knot vector; u must lie in
// [lo, hi]. Returns all n_bspline values (only degree + 1 are nonzero).
Eigen::VectorXd bspline_dense(const Eigen::VectorXd& knots, int degree, Eigen::Index n_basis,
                              double u) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n_basis);
  // span index j with knots[j] <= u < knots[j+1]; the last basis function owns
  // the right boundary
  Eigen::Index span = degree;
  const Eigen::Index last_span = n_basis - 1;
  while (span < last_span && u >= knots[span + 1]) ++span;

  std::vector<double> vals(static_cast<std::size_t>(degree) + 1, 0.0);
  vals[0] = 1.0;
  std::vector<double> left(static_cast<std::size_t>(degree) + 1, 0.0);
  std::vector<double> right(static_cast<std::size_t>(degree) + 1, 0.0);
  for (int j = 1; j <= degree; ++j) {
    left[j] = u - knots[span + 1 - j];
    right[j] = knots[span + j] - u;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double denom = right[r + 1] + left[j - r];
      const double temp = denom > 0.0 ? vals[r] / denom : 0.0;
      vals[r] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    vals[j] = saved;
  }
  for (int j = 0; j <= degree; ++j) {
    const Eigen::Index idx = span - degree + j;
    if (idx >= 0 && idx < n_basis) out[idx] = vals[j];
  }
  return out;
}

SplineBasis assemble(double lo, double hi, std::vector<double> knots, int degree,
                     int n_requested) {
  SplineBasis basis;
  basis.degree = degree;
  basis.lo = lo;
  basis.hi = hi;

  std::sort(knots.begin(), knots.end());
  std::vector<double> kept;
  const double tol = 1e-12 * std::max(1.0, hi - lo);
  for (double t : knots) {
    if (!(t > lo + tol) || !(t < hi - tol)) continue;
    if (!kept.empty() && t - kept.back() <= tol) continue;
    kept.push_back(t);
  }
  if (static_cast<int>(kept.size()) < n_requested) {
    basis.warnings.push_back("collapsed " + std::to_string(n_requested - kept.size()) +
                             " duplicate or out-of-range interior knots");
  }
  basis.interior_knots = Eigen::Map<const Eigen::VectorXd>(kept.data(),
                                                           static_cast<Eigen::Index>(kept.size()));
  basis.k = basis.interior_knots.size() + degree;
  return basis;
}

}  // namespace

Eigen::VectorXd SplineBasis::padded_knots() const {
  const Eigen::Index m = interior_knots.size();
  Eigen::VectorXd knots(m + 2 * (degree + 1));
  knots.head(degree + 1).setConstant(lo);
  knots.segment(degree + 1, m) = interior_knots;
  knots.tail(degree + 1).setConstant(hi);
  return knots;
}

SplineBasis make_basis(const std::vector<double>& times, int degree, int n_knots,
                       KnotPlacement placement) {
  if (times.empty()) throw std::invalid_argument("make_basis: times must be nonempty");
  const double t_max = *std::max_element(times.begin(), times.end());
  return make_basis_interval(0.0, t_max * (1.0 + 1e-9), times, degree, n_knots, placement);
}

SplineBasis make_basis_interval(double lo, double hi, const std::vector<double>& values,
                                int degree, int n_knots, KnotPlacement placement) {
  if (degree < 1 || degree > 4) throw std::invalid_argument("spline degree must be in {1,2,3,4}");
  if (n_knots < 2) throw std::invalid_argument("at least 2 interior knots are required");
  if (!(hi > lo)) throw std::invalid_argument("spline boundary must satisfy lo < hi");

  std::vector<double> knots;
  knots.reserve(static_cast<std::size_t>(n_knots));
  if (placement == KnotPlacement::even) {
    for (int j = 1; j <= n_knots; ++j) {
      knots.push_back(lo + (hi - lo) * static_cast<double>(j) / (n_knots + 1));
    }
  } else {
    std::vector<double> sorted(values);
    std::sort(sorted.begin(), sorted.end());
    for (int j = 1; j <= n_knots; ++j) {
      knots.push_back(quantile_sorted(sorted, static_cast<double>(j) / (n_knots + 1)));
    }
  }
  return assemble(lo, hi, std::move(knots), degree, n_knots);
}

Eigen::VectorXd eval_ispline(const SplineBasis& basis, double t) {
  if (!(t >= 0.0)) throw std::domain_error("eval_ispline: t must be nonnegative");
  if (t <= basis.lo) return Eigen::VectorXd::Zero(basis.k);
  if (t >= basis.hi) return Eigen::VectorXd::Ones(basis.k);

  // I_l(t) = sum_{j > l} N_j(t): integrating the l-th M-spline telescopes the
  // B-spline derivative identity into a suffix sum of same-degree B-splines
  const Eigen::VectorXd b = bspline_dense(basis.padded_knots(), basis.degree,
                                          basis.n_bspline(), t);
  Eigen::VectorXd out(basis.k);
  double acc = 0.0;
  for (Eigen::Index l = basis.k - 1; l >= 0; --l) {
    acc += b[l + 1];
    out[l] = std::clamp(acc, 0.0, 1.0);
  }
  return out;
}

Eigen::VectorXd eval_bspline(const SplineBasis& basis, double u) {
  if (!std::isfinite(u)) throw std::domain_error("eval_bspline: u must be finite");
  const double uc = std::clamp(u, basis.lo, basis.hi);
  return bspline_dense(basis.padded_knots(), basis.degree, basis.n_bspline(), uc);
}

}  // namespace icmc
