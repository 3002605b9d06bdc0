#include "icmc/mstep.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "icmc/numeric.hpp"

namespace icmc {

namespace {

Eigen::VectorXd kahan_colsum(const Eigen::MatrixXd& m) {
  Eigen::VectorXd out(m.cols());
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    KahanSum s;
    for (Eigen::Index i = 0; i < m.rows(); ++i) s.add(m(i, j));
    out[j] = s.value();
  }
  return out;
}

// per-subject multiplier s_i = exp(beta.z_i) E(xi_i B_i)
Eigen::VectorXd subject_scale(const EStepCache& cache, const CureDataset& ds,
                              const Eigen::VectorXd& beta) {
  return (ds.z_mat * beta).array().exp() * cache.e_xi_b.array();
}

}  // namespace

Eigen::MatrixXd risk_matrix(const CureDataset& ds, const DataBasis& db) {
  Eigen::MatrixXd risk = db.at_right;
  for (Eigen::Index i = 0; i < risk.rows(); ++i) {
    if (ds.observations[static_cast<std::size_t>(i)].delta_r) {
      risk.row(i) = db.at_left.row(i);
    }
  }
  return risk;
}

Eigen::VectorXd eta_of_beta(const EStepCache& cache, const CureDataset& ds,
                            const Eigen::VectorXd& beta, const Eigen::MatrixXd& risk,
                            std::vector<std::string>* warnings) {
  const Eigen::VectorXd counts = kahan_colsum(cache.e_y_il + cache.e_w_il);
  const Eigen::VectorXd s = subject_scale(cache, ds, beta);
  const auto k = risk.cols();
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(k);
  for (Eigen::Index l = 0; l < k; ++l) {
    KahanSum denom;
    for (Eigen::Index i = 0; i < risk.rows(); ++i) denom.add(s[i] * risk(i, l));
    const double d = denom.value();
    if (d > 0.0) {
      eta[l] = counts[l] / d;
    } else if (counts[l] > 0.0) {
      throw NumericError("eta update: zero denominator with positive counts in column " +
                         std::to_string(l));
    } else if (warnings != nullptr) {
      warnings->push_back("dead basis column " + std::to_string(l));
    }
  }
  return eta;
}

Eigen::VectorXd profile_score(const EStepCache& cache, const CureDataset& ds,
                              const Eigen::MatrixXd& risk, const Eigen::VectorXd& beta) {
  const auto d2 = beta.size();
  const Eigen::VectorXd counts = kahan_colsum(cache.e_y_il + cache.e_w_il);
  const Eigen::VectorXd row_counts = (cache.e_y_il + cache.e_w_il).rowwise().sum();
  const Eigen::VectorXd s = subject_scale(cache, ds, beta);
  const auto k = risk.cols();

  Eigen::VectorXd d_l = Eigen::VectorXd::Zero(k);
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(d2, k);  // v_l = sum_i s_i risk_il z_i
  for (Eigen::Index l = 0; l < k; ++l) {
    KahanSum denom;
    for (Eigen::Index i = 0; i < risk.rows(); ++i) denom.add(s[i] * risk(i, l));
    d_l[l] = denom.value();
    for (Eigen::Index j = 0; j < d2; ++j) {
      KahanSum sum;
      for (Eigen::Index i = 0; i < risk.rows(); ++i) sum.add(s[i] * risk(i, l) * ds.z_mat(i, j));
      v(j, l) = sum.value();
    }
  }

  Eigen::VectorXd score(d2);
  for (Eigen::Index j = 0; j < d2; ++j) {
    KahanSum sum;
    for (Eigen::Index i = 0; i < risk.rows(); ++i) sum.add(row_counts[i] * ds.z_mat(i, j));
    for (Eigen::Index l = 0; l < k; ++l) {
      if (d_l[l] > 0.0) sum.add(-counts[l] / d_l[l] * v(j, l));
    }
    score[j] = sum.value();
  }
  return score;
}

Eigen::MatrixXd profile_score_jacobian(const EStepCache& cache, const CureDataset& ds,
                                       const Eigen::MatrixXd& risk, const Eigen::VectorXd& beta) {
  const auto d2 = beta.size();
  const Eigen::VectorXd counts = kahan_colsum(cache.e_y_il + cache.e_w_il);
  const Eigen::VectorXd s = subject_scale(cache, ds, beta);
  const auto k = risk.cols();

  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(d2, d2);
  for (Eigen::Index l = 0; l < k; ++l) {
    const Eigen::VectorXd w = s.array() * risk.col(l).array();
    const double d_l = w.sum();
    if (!(d_l > 0.0) || counts[l] == 0.0) continue;
    const Eigen::VectorXd v_l = ds.z_mat.transpose() * w;
    const Eigen::MatrixXd m_l = ds.z_mat.transpose() * w.asDiagonal() * ds.z_mat;
    jac -= counts[l] * (m_l / d_l - v_l * v_l.transpose() / (d_l * d_l));
  }
  return jac;
}

namespace {

Eigen::MatrixXd fd_jacobian(const EStepCache& cache, const CureDataset& ds,
                            const Eigen::MatrixXd& risk, const Eigen::VectorXd& beta) {
  const auto d2 = beta.size();
  Eigen::MatrixXd jac(d2, d2);
  for (Eigen::Index j = 0; j < d2; ++j) {
    const double h = 1e-6 * std::max(1.0, std::abs(beta[j]));
    Eigen::VectorXd hi = beta, lo = beta;
    hi[j] += h;
    lo[j] -= h;
    jac.col(j) = (profile_score(cache, ds, risk, hi) - profile_score(cache, ds, risk, lo)) /
                 (2.0 * h);
  }
  return jac;
}

}  // namespace

BetaSolve solve_beta(const EStepCache& cache, const CureDataset& ds,
                     const Eigen::MatrixXd& risk, const Eigen::VectorXd& beta_start,
                     double tol, int max_iter) {
  BetaSolve result;
  result.beta = beta_start;
  if (beta_start.size() == 0) return result;  // no latency covariates

  Eigen::VectorXd score = profile_score(cache, ds, risk, result.beta);
  double norm = score.lpNorm<Eigen::Infinity>();
  for (int iter = 0; iter < max_iter; ++iter) {
    if (norm < tol) {
      result.converged = true;
      result.n_iter = iter;
      return result;
    }
    Eigen::MatrixXd jac = profile_score_jacobian(cache, ds, risk, result.beta);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(jac, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double smin = svd.singularValues().tail(1)(0);
    const double smax = svd.singularValues()(0);
    if (!jac.allFinite() || !(smin > 0.0) || smax / smin > 1e12) {
      jac = fd_jacobian(cache, ds, risk, result.beta);
    }
    const Eigen::VectorXd step = jac.fullPivLu().solve(score);
    if (!step.allFinite()) break;

    double t = 1.0;
    Eigen::VectorXd candidate;
    Eigen::VectorXd cand_score;
    double cand_norm = std::numeric_limits<double>::infinity();
    while (t > 1e-10) {
      candidate = result.beta - t * step;
      cand_score = profile_score(cache, ds, risk, candidate);
      cand_norm = cand_score.lpNorm<Eigen::Infinity>();
      if (std::isfinite(cand_norm) && cand_norm < norm) break;
      t *= 0.5;
    }
    if (!(cand_norm < norm)) break;  // stalled
    result.beta = candidate;
    score = cand_score;
    norm = cand_norm;
    result.n_iter = iter + 1;
  }
  result.converged = norm < tol;
  return result;
}

double q2_objective(const EStepCache& cache, const CureDataset& ds, const Eigen::MatrixXd& risk,
                    const Eigen::VectorXd& beta, const Eigen::VectorXd& eta) {
  const Eigen::MatrixXd counts = cache.e_y_il + cache.e_w_il;
  const Eigen::VectorXd bz = ds.z_mat * beta;
  const Eigen::VectorXd s = bz.array().exp() * cache.e_xi_b.array();
  KahanSum q;
  for (Eigen::Index i = 0; i < risk.rows(); ++i) {
    for (Eigen::Index l = 0; l < risk.cols(); ++l) {
      if (counts(i, l) > 0.0) {
        if (!(eta[l] > 0.0)) return -std::numeric_limits<double>::infinity();
        q.add(counts(i, l) * (std::log(eta[l]) + bz[i]));
      }
      q.add(-eta[l] * s[i] * risk(i, l));
    }
  }
  return q.value();
}

}  // namespace icmc
