#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "icmc/data.hpp"
#include "icmc/estep.hpp"

namespace icmc {

// (1 - delta_R) b_l(R_i) + delta_R b_l(L_i): the at-risk basis value each
// subject contributes to the eta denominators; fixed for a given basis
Eigen::MatrixXd risk_matrix(const CureDataset& ds, const DataBasis& db);

// closed-form spline coefficients given beta. A zero denominator marks a dead
// basis column: eta_l = 0 with a warning, never an exception.
Eigen::VectorXd eta_of_beta(const EStepCache& cache, const CureDataset& ds,
                            const Eigen::VectorXd& beta, const Eigen::MatrixXd& risk,
                            std::vector<std::string>* warnings = nullptr);

struct BetaSolve {
  Eigen::VectorXd beta;
  bool converged = true;
  int n_iter = 0;
};

// Solves the profile score (eta substituted as a function of beta) by Newton
// iterations with an analytic Jacobian, step-halving on the sup-norm of the
// score and a finite-difference fallback when the Jacobian is ill-conditioned.
BetaSolve solve_beta(const EStepCache& cache, const CureDataset& ds,
                     const Eigen::MatrixXd& risk, const Eigen::VectorXd& beta_start,
                     double tol = 1e-8, int max_iter = 100);

// profile score evaluated at (beta, eta(beta))
Eigen::VectorXd profile_score(const EStepCache& cache, const CureDataset& ds,
                              const Eigen::MatrixXd& risk, const Eigen::VectorXd& beta);

// analytic Jacobian of the profile score (chain rule through the closed-form
// eta); the Newton solve falls back to finite differences when this is
// ill-conditioned
Eigen::MatrixXd profile_score_jacobian(const EStepCache& cache, const CureDataset& ds,
                                       const Eigen::MatrixXd& risk, const Eigen::VectorXd& beta);

// minorizer value at (beta, eta); columns with zero counts and zero eta are
// skipped so the 0 log 0 convention applies
double q2_objective(const EStepCache& cache, const CureDataset& ds, const Eigen::MatrixXd& risk,
                    const Eigen::VectorXd& beta, const Eigen::VectorXd& eta);

}  // namespace icmc
