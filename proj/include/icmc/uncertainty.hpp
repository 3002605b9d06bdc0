#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <vector>

#include "icmc/fit.hpp"

namespace icmc {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct BootstrapResult {
  int b = 0;
  Eigen::VectorXd beta_se;
  Eigen::VectorXd gamma_se;  // includes the intercept first for the logistic engine
  std::vector<Interval> beta_ci_normal, beta_ci_percentile;
  std::vector<Interval> gamma_ci_normal, gamma_ci_percentile;
  std::vector<std::array<double, 3>> lambda_band;  // (t, lo, hi) pointwise 95%
  std::vector<bool> replicate_status;              // converged flag per replicate
  int n_converged = 0;
  bool reliable = true;  // false when more than 20% of replicates fail
  Eigen::MatrixXd beta_draws;   // converged replicates x d2
  Eigen::MatrixXd gamma_draws;  // converged replicates x (d1 or d1 + 1)
};

// Case resampling at the subject level. Replicates are refit warm-started at
// the original estimate unless cold_start is set; each replicate draws from
// its own seed-derived stream so the thread count cannot change the result.
BootstrapResult bootstrap(const CureDataset& ds, const FitConfig& config, int b,
                          std::uint64_t seed, const FitResult& fit, bool cold_start = false,
                          unsigned n_threads = 0);

// two-sided normal p-value of estimate / se; se = 0 reports 0 (degenerate)
double wald_p(double estimate, double se);

}  // namespace icmc
