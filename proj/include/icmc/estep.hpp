#pragma once

#include <Eigen/Core>
#include <optional>
#include <utility>
#include <vector>

#include "icmc/data.hpp"
#include "icmc/splines.hpp"
#include "icmc/transform.hpp"

namespace icmc {

// I-spline values at the observed endpoints, evaluated once per fit. Rows of
// at_right for right-censored subjects are zero and never enter a formula
// that reads Lambda(R).
struct DataBasis {
  Eigen::MatrixXd at_left;   // n x k, b_l(L_i)
  Eigen::MatrixXd at_right;  // n x k, b_l(R_i) where finite
};

DataBasis evaluate_basis(const CureDataset& ds, const SplineBasis& basis);

// N_i1 = exp(beta.z_i) Lambda(L_i); N_i2 likewise at R_i. N_i2 is absent for
// right-censored subjects rather than encoded as a sentinel, so an infinite
// endpoint can never reach the spline basis.
struct Loads {
  Eigen::VectorXd n1;
  std::vector<std::optional<double>> n2;
};

Loads compute_loads(const CureDataset& ds, const DataBasis& db, const Eigen::VectorXd& beta,
                    const Eigen::VectorXd& eta);
Loads compute_loads(const CureDataset& ds, const Eigen::VectorXd& beta,
                    const Eigen::VectorXd& eta, const SplineBasis& basis);

// posterior expectations of the latent augmentation at the current parameters
struct EStepCache {
  Eigen::VectorXd e_b;      // in [0, 1]; 1 unless right-censored
  Eigen::VectorXd e_xi_b;   // >= 0
  Eigen::VectorXd e_y;      // > 0 only for left-censored subjects
  Eigen::VectorXd e_w;      // > 0 only for interval-censored subjects
  Eigen::MatrixXd e_y_il;   // n x k, rows sum to e_y
  Eigen::MatrixXd e_w_il;   // n x k, rows sum to e_w
  Loads loads;
};

Eigen::VectorXd expect_b(const Transformation& tr, const CureDataset& ds, const Loads& loads,
                         const Eigen::VectorXd& p_x);

Eigen::VectorXd expect_xi_b(const Transformation& tr, const CureDataset& ds, const Loads& loads,
                            const Eigen::VectorXd& p_x);

// (E(Y_i), E(W_i)) from the truncated-Poisson layers
std::pair<Eigen::VectorXd, Eigen::VectorXd> expect_poisson(const Transformation& tr,
                                                           const CureDataset& ds,
                                                           const Loads& loads);

// binomial thinning of the totals onto the basis columns; rows reproduce the
// totals exactly
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> split_counts(const Eigen::VectorXd& e_y,
                                                         const Eigen::VectorXd& e_w,
                                                         const Eigen::VectorXd& eta,
                                                         const DataBasis& db,
                                                         const CureDataset& ds);

EStepCache run_estep(const CureDataset& ds, const DataBasis& db, const Transformation& tr,
                     const Eigen::VectorXd& beta, const Eigen::VectorXd& eta,
                     const Eigen::VectorXd& p_x);

}  // namespace icmc
