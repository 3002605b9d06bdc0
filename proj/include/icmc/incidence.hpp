#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "icmc/data.hpp"
#include "icmc/rng.hpp"
#include "icmc/splines.hpp"

namespace icmc {

enum class EngineKind { kernel, sieve, logistic };

std::string engine_name(EngineKind kind);
EngineKind engine_from_name(const std::string& name);

// State of the incidence component p(X) = g(gamma.X). For kernel and sieve
// engines gamma lives on the unit sphere with gamma_1 > 0; the logistic
// engine carries an intercept instead and is unconstrained. Value type:
// candidate evaluations may copy it freely.
struct IncidenceState {
  EngineKind engine = EngineKind::kernel;
  Eigen::VectorXd gamma;
  double gamma0 = 0.0;           // logistic intercept
  double h = 0.25;               // kernel bandwidth
  SplineBasis link_basis;        // sieve basis over the index range
  Eigen::VectorXd psi;           // sieve coefficients
  Eigen::VectorXd train_index;   // kernel: gamma.X_j at the fitted sample
  Eigen::VectorXd train_eb;      // kernel: E(B_j) weights
  Eigen::VectorXd fitted_p;      // clamped to [1e-6, 1 - 1e-6]
  bool update_warning = false;
};

// Epanechnikov kernel on |u| <= sqrt(5): (3 - 0.6 u^2) / (4 sqrt 5)
double epanechnikov(double u);

// Leave-one-out Nadaraya-Watson estimate at every sample point. A point with
// an empty neighborhood falls back to the global mean of the responses.
Eigen::VectorXd kernel_loo(const Eigen::VectorXd& index, const Eigen::VectorXd& responses,
                           double h);

// Nadaraya-Watson at new index values over a fixed training sample
Eigen::VectorXd kernel_predict(const Eigen::VectorXd& index_new,
                               const Eigen::VectorXd& index_train,
                               const Eigen::VectorXd& responses, double h);

// Bernoulli objective sum e_b log p + (1 - e_b) log(1 - p), probabilities
// clamped before the logs
double q1_objective(const Eigen::VectorXd& e_b, const Eigen::VectorXd& p);

// unit sphere with positive first coordinate; the chart used by the
// derivative-free search is gamma(theta) = normalize(1, theta)
Eigen::VectorXd project_to_sphere(Eigen::VectorXd gamma);
Eigen::VectorXd gamma_from_chart(const Eigen::VectorXd& theta);
Eigen::VectorXd chart_from_gamma(const Eigen::VectorXd& gamma);

// argmax over the grid of the likelihood cross-validation criterion; ties go
// to the smaller bandwidth
double select_bandwidth(const Eigen::VectorXd& index, const Eigen::VectorXd& e_b,
                        const std::vector<double>& h_grid);

// One M-step update of gamma by simplex search on the chart, multi-started
// from the current point plus two random perturbations. The update never
// accepts a candidate that lowers the objective; total failure keeps the
// current point and raises the warning flag.
IncidenceState update_gamma_kernel(const CureDataset& ds, const Eigen::VectorXd& e_b,
                                   const IncidenceState& current, rng::Engine& restarts);

struct SieveConfig {
  int degree = 3;
  int n_knots = 3;
  KnotPlacement placement = KnotPlacement::quantile;
};

IncidenceState update_sieve(const CureDataset& ds, const Eigen::VectorXd& e_b,
                            const IncidenceState& current, const SieveConfig& cfg,
                            rng::Engine& restarts);

// Newton fit of the working Bernoulli likelihood with intercept; coefficients
// beyond |50| are clipped with a separation warning
IncidenceState update_logistic(const CureDataset& ds, const Eigen::VectorXd& e_b,
                               const IncidenceState& current,
                               std::vector<std::string>* warnings = nullptr);

// fitted link at new covariate rows (kernel: NW over the training sample)
Eigen::VectorXd predict_p(const IncidenceState& st, const Eigen::MatrixXd& x);

// fitted link over raw index values (for link-curve output)
Eigen::VectorXd predict_link(const IncidenceState& st, const Eigen::VectorXd& u);

// paper Step 1: logistic fit on pseudo-responses 1 - delta_R; kernel/sieve
// drop the intercept and project the slopes onto the sphere
IncidenceState init_incidence(const CureDataset& ds, EngineKind engine, const SieveConfig& cfg,
                              const std::vector<double>& h_grid);

}  // namespace icmc
