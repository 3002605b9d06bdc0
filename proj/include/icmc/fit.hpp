#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "icmc/data.hpp"
#include "icmc/incidence.hpp"
#include "icmc/splines.hpp"
#include "icmc/transform.hpp"

namespace icmc {

struct FitConfig {
  double r = 0.0;
  EngineKind engine = EngineKind::kernel;
  int spline_degree = 3;
  int n_knots = 5;
  KnotPlacement placement = KnotPlacement::quantile;
  int sieve_knots = 3;  // interior knots of the link basis
  std::vector<double> h_grid = {0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45, 0.50};
  int max_iter = 500;
  double tol_param = 1e-4;
  double tol_loglik = 1e-7;
  std::uint64_t seed = 1;
  bool standardize = false;
  bool eta_init_ones = false;  // start eta at 1 instead of 1/k
  int bandwidth_refresh = 5;   // cross-validate h every this many iterations

  void check() const;
};

struct ModelParams {
  Transformation tr{0.0};
  Eigen::VectorXd beta;
  Eigen::VectorXd eta;  // componentwise >= 0
  SplineBasis basis;
  IncidenceState incidence;
};

struct FitResult {
  ModelParams params;
  double loglik = 0.0;
  double aic = 0.0;
  double bic = 0.0;
  int n_parameters = 0;
  int n_iter = 0;
  bool converged = false;
  std::vector<double> loglik_trace;
  std::vector<std::string> warnings;
  Standardization standardization;
  std::size_t n_obs = 0;
};

// log of the observed-data likelihood with explicit incidence values p
double observed_loglik(const CureDataset& ds, const ModelParams& params,
                       const Eigen::VectorXd& p);

// incidence evaluated through the fitted engine at the rows of ds
double observed_loglik(const CureDataset& ds, const ModelParams& params);

// scores a fresh dataset, applying any recorded covariate standardization
double score_loglik(const FitResult& fit, const CureDataset& ds);

CureDataset apply_standardization(const CureDataset& ds, const Standardization& st);

// EM driver (expectation, incidence update, beta, eta). `warm` seeds the
// parameters from a previous fit instead of the cold start.
FitResult fit_em(const CureDataset& ds, const FitConfig& config,
                 const ModelParams* warm = nullptr);

struct RProfilePoint {
  double r = 0.0;
  double valid_loglik = 0.0;
};

struct RGridResult {
  double best_r = 0.0;
  FitResult best_fit;
  std::vector<RProfilePoint> profile;  // successes only
  std::vector<std::string> warnings;
};

// refits on train for every r, scores the observed log-likelihood on the
// validation set, and returns the argmax; ties break toward smaller r
RGridResult fit_r_grid(const CureDataset& train, const CureDataset& valid,
                       const FitConfig& config, const std::vector<double>& r_grid,
                       unsigned n_threads = 0);

// seeded subject-level split; returns (train indices, validation indices)
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    std::size_t n, double train_fraction, std::uint64_t seed);

}  // namespace icmc
