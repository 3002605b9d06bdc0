#include "icmc/estep.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "icmc/numeric.hpp"

namespace icmc {

namespace {

// G(N2) - G(N1) without cancellation for nearby loads
double g_gap(const Transformation& tr, double n1, double n2) {
  if (tr.r == 0.0) return n2 - n1;
  return std::log1p(tr.r * (n2 - n1) / (1.0 + tr.r * n1)) / tr.r;
}

// 1 - exp(-g)
double one_minus_exp_neg(double g) { return -std::expm1(-g); }

}  // namespace

DataBasis evaluate_basis(const CureDataset& ds, const SplineBasis& basis) {
  const auto n = static_cast<Eigen::Index>(ds.size());
  DataBasis db;
  db.at_left = Eigen::MatrixXd::Zero(n, basis.k);
  db.at_right = Eigen::MatrixXd::Zero(n, basis.k);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& o = ds.observations[static_cast<std::size_t>(i)];
    db.at_left.row(i) = eval_ispline(basis, o.left).transpose();
    if (!o.delta_r) db.at_right.row(i) = eval_ispline(basis, o.right).transpose();
  }
  return db;
}

Loads compute_loads(const CureDataset& ds, const DataBasis& db, const Eigen::VectorXd& beta,
                    const Eigen::VectorXd& eta) {
  if ((eta.array() < 0.0).any()) throw std::invalid_argument("eta must be nonnegative");
  const auto n = static_cast<Eigen::Index>(ds.size());
  const Eigen::VectorXd scale = (ds.z_mat * beta).array().exp();
  Loads loads;
  loads.n1 = scale.array() * (db.at_left * eta).array();
  loads.n2.assign(static_cast<std::size_t>(n), std::nullopt);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!ds.observations[static_cast<std::size_t>(i)].delta_r) {
      loads.n2[static_cast<std::size_t>(i)] = scale[i] * db.at_right.row(i).dot(eta);
    }
  }
  return loads;
}

Loads compute_loads(const CureDataset& ds, const Eigen::VectorXd& beta,
                    const Eigen::VectorXd& eta, const SplineBasis& basis) {
  return compute_loads(ds, evaluate_basis(ds, basis), beta, eta);
}

Eigen::VectorXd expect_b(const Transformation& tr, const CureDataset& ds, const Loads& loads,
                         const Eigen::VectorXd& p_x) {
  const auto n = static_cast<Eigen::Index>(ds.size());
  Eigen::VectorXd e_b = Eigen::VectorXd::Ones(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& o = ds.observations[static_cast<std::size_t>(i)];
    if (!o.delta_r) continue;
    const double p = clamp_probability(p_x[i]);
    const double s = laplace(tr, loads.n1[i]);
    e_b[i] = p * s / (1.0 - p + p * s);
  }
  return e_b;
}

Eigen::VectorXd expect_xi_b(const Transformation& tr, const CureDataset& ds, const Loads& loads,
                            const Eigen::VectorXd& p_x) {
  const auto n = static_cast<Eigen::Index>(ds.size());
  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& o = ds.observations[static_cast<std::size_t>(i)];
    const double n1 = loads.n1[i];
    if (o.delta_l) {
      const double n2 = *loads.n2[static_cast<std::size_t>(i)];
      const double g2 = g_of(tr, n2);
      // 1 - e^{-G} G' split into two positive terms to avoid cancellation
      const double denom = one_minus_exp_neg(g2);
      const double numer =
          denom + std::exp(-g2) * tr.r * n2 / (1.0 + tr.r * n2);
      out[i] = denom > 0.0 ? numer / denom : 1.0 + tr.r;  // N2 -> 0 limit
    } else if (o.delta_i) {
      const double n2 = *loads.n2[static_cast<std::size_t>(i)];
      const double gp1 = g_prime(tr, n1);
      const double gp2 = g_prime(tr, n2);
      const double gap = one_minus_exp_neg(g_gap(tr, n1, n2));
      // numerator factored by e^{-G(N1)}: (G'1 - G'2) + G'2 (1 - e^{-dG})
      const double diff = tr.r * (n2 - n1) * gp1 * gp2;
      out[i] = gap > 0.0 ? (diff + gp2 * gap) / gap : gp1;
    } else {
      const double p = clamp_probability(p_x[i]);
      const double s = laplace(tr, n1);
      out[i] = p * s * g_prime(tr, n1) / (1.0 - p + p * s);
    }
  }
  return out;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> expect_poisson(const Transformation& tr,
                                                           const CureDataset& ds,
                                                           const Loads& loads) {
  const auto n = static_cast<Eigen::Index>(ds.size());
  Eigen::VectorXd e_y = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd e_w = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& o = ds.observations[static_cast<std::size_t>(i)];
    if (o.delta_l) {
      const double n2 = *loads.n2[static_cast<std::size_t>(i)];
      if (!(n2 > 0.0)) {
        throw NumericError("degenerate interval: Lambda(R) = 0 for left-censored subject " +
                           std::to_string(i));
      }
      e_y[i] = n2 * frailty_mean(tr) / one_minus_exp_neg(g_of(tr, n2));
    } else if (o.delta_i) {
      const double n1 = loads.n1[i];
      const double n2 = *loads.n2[static_cast<std::size_t>(i)];
      if (!(n2 > n1)) {
        throw NumericError("degenerate interval: Lambda(R) = Lambda(L) for subject " +
                           std::to_string(i));
      }
      e_w[i] = (n2 - n1) * g_prime(tr, n1) / one_minus_exp_neg(g_gap(tr, n1, n2));
    }
  }
  return {std::move(e_y), std::move(e_w)};
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> split_counts(const Eigen::VectorXd& e_y,
                                                         const Eigen::VectorXd& e_w,
                                                         const Eigen::VectorXd& eta,
                                                         const DataBasis& db,
                                                         const CureDataset& ds) {
  const auto n = static_cast<Eigen::Index>(ds.size());
  const auto k = eta.size();
  Eigen::MatrixXd e_y_il = Eigen::MatrixXd::Zero(n, k);
  Eigen::MatrixXd e_w_il = Eigen::MatrixXd::Zero(n, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& o = ds.observations[static_cast<std::size_t>(i)];
    if (o.delta_l && e_y[i] > 0.0) {
      const Eigen::ArrayXd weights = eta.array() * db.at_right.row(i).transpose().array();
      const double denom = weights.sum();
      if (!(denom > 0.0)) {
        throw NumericError("zero thinning denominator with positive E(Y) at subject " +
                           std::to_string(i));
      }
      e_y_il.row(i) = (weights / denom * e_y[i]).transpose();
    } else if (o.delta_i && e_w[i] > 0.0) {
      // b_l(R) - b_l(L) is nonnegative up to rounding; clamp the residue
      const Eigen::ArrayXd weights =
          (eta.array() * (db.at_right.row(i) - db.at_left.row(i)).transpose().array()).max(0.0);
      const double denom = weights.sum();
      if (!(denom > 0.0)) {
        throw NumericError("zero thinning denominator with positive E(W) at subject " +
                           std::to_string(i));
      }
      e_w_il.row(i) = (weights / denom * e_w[i]).transpose();
    }
  }
  return {std::move(e_y_il), std::move(e_w_il)};
}

EStepCache run_estep(const CureDataset& ds, const DataBasis& db, const Transformation& tr,
                     const Eigen::VectorXd& beta, const Eigen::VectorXd& eta,
                     const Eigen::VectorXd& p_x) {
  EStepCache cache;
  cache.loads = compute_loads(ds, db, beta, eta);
  cache.e_b = expect_b(tr, ds, cache.loads, p_x);
  cache.e_xi_b = expect_xi_b(tr, ds, cache.loads, p_x);
  auto [e_y, e_w] = expect_poisson(tr, ds, cache.loads);
  cache.e_y = std::move(e_y);
  cache.e_w = std::move(e_w);
  auto [y_il, w_il] = split_counts(cache.e_y, cache.e_w, eta, db, ds);
  cache.e_y_il = std::move(y_il);
  cache.e_w_il = std::move(w_il);
  return cache;
}

}  // namespace icmc
