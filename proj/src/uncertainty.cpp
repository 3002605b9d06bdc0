#include "icmc/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "icmc/numeric.hpp"
#include "icmc/rng.hpp"
#include "icmc/splines.hpp"

namespace icmc {

namespace {

Eigen::VectorXd gamma_block(const FitResult& fit) {
  if (fit.params.incidence.engine == EngineKind::logistic) {
    Eigen::VectorXd g(fit.params.incidence.gamma.size() + 1);
    g[0] = fit.params.incidence.gamma0;
    g.tail(fit.params.incidence.gamma.size()) = fit.params.incidence.gamma;
    return g;
  }
  return fit.params.incidence.gamma;
}

std::vector<Interval> normal_ci(const Eigen::VectorXd& est, const Eigen::VectorXd& se) {
  std::vector<Interval> out(static_cast<std::size_t>(est.size()));
  for (Eigen::Index j = 0; j < est.size(); ++j) {
    out[static_cast<std::size_t>(j)] = {est[j] - 1.96 * se[j], est[j] + 1.96 * se[j]};
  }
  return out;
}

std::vector<Interval> percentile_ci(const Eigen::MatrixXd& draws) {
  std::vector<Interval> out(static_cast<std::size_t>(draws.cols()));
  for (Eigen::Index j = 0; j < draws.cols(); ++j) {
    std::vector<double> col(draws.col(j).data(), draws.col(j).data() + draws.rows());
    std::sort(col.begin(), col.end());
    out[static_cast<std::size_t>(j)] = {quantile_sorted(col, 0.025), quantile_sorted(col, 0.975)};
  }
  return out;
}

Eigen::VectorXd column_sd(const Eigen::MatrixXd& draws) {
  Eigen::VectorXd out(draws.cols());
  for (Eigen::Index j = 0; j < draws.cols(); ++j) {
    std::vector<double> col(draws.col(j).data(), draws.col(j).data() + draws.rows());
    out[j] = sd_of(col);
  }
  return out;
}

}  // namespace

BootstrapResult bootstrap(const CureDataset& ds, const FitConfig& config, int b,
                          std::uint64_t seed, const FitResult& fit, bool cold_start,
                          unsigned n_threads) {
  if (b < 2) throw std::invalid_argument("bootstrap needs at least 2 replicates");
  const std::size_t n = ds.size();

  struct Rep {
    bool ok = false;
    Eigen::VectorXd beta;
    Eigen::VectorXd gamma;
    Eigen::VectorXd lambda;  // on the band grid
  };

  // time grid for the Lambda band: spread over the observed endpoint range
  const double t_max = ds.finite_endpoints.empty() ? 1.0 : ds.finite_endpoints.back();
  const int n_grid = 41;
  Eigen::VectorXd t_grid(n_grid);
  for (int g = 0; g < n_grid; ++g) t_grid[g] = t_max * static_cast<double>(g) / (n_grid - 1);

  std::vector<Rep> reps(static_cast<std::size_t>(b));
  parallel_for(static_cast<std::size_t>(b), [&](std::size_t rep) {
    rng::Engine eng = rng::make_engine(seed, 0xb007 + rep);
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = rng::uniform_index(eng, n);
    try {
      const CureDataset sample = subset(ds, idx);
      FitConfig cfg = config;
      cfg.seed = seed + rep + 1;
      // replicate refits run at a relaxed tolerance: the residual parameter
      // drift (~1e-3) is orders of magnitude below any bootstrap SE
      cfg.tol_param = std::max(cfg.tol_param, 5e-4);
      cfg.tol_loglik = std::max(cfg.tol_loglik, 1e-6);
      const FitResult refit = fit_em(sample, cfg, cold_start ? nullptr : &fit.params);
      reps[rep].ok = refit.converged;
      reps[rep].beta = refit.params.beta;
      reps[rep].gamma = gamma_block(refit);
      reps[rep].lambda.resize(n_grid);
      for (int g = 0; g < n_grid; ++g) {
        reps[rep].lambda[g] = eval_ispline(refit.params.basis, t_grid[g]).dot(refit.params.eta);
      }
    } catch (const std::exception&) {
      reps[rep].ok = false;
    }
  }, n_threads);

  BootstrapResult out;
  out.b = b;
  out.replicate_status.resize(static_cast<std::size_t>(b));
  for (int rep = 0; rep < b; ++rep) {
    out.replicate_status[static_cast<std::size_t>(rep)] = reps[static_cast<std::size_t>(rep)].ok;
    out.n_converged += reps[static_cast<std::size_t>(rep)].ok ? 1 : 0;
  }
  out.reliable = out.n_converged >= static_cast<int>(std::ceil(0.8 * b));
  if (out.n_converged < 2) throw NumericError("fewer than 2 bootstrap replicates converged");

  const Eigen::VectorXd gamma_hat = gamma_block(fit);
  out.beta_draws.resize(out.n_converged, fit.params.beta.size());
  out.gamma_draws.resize(out.n_converged, gamma_hat.size());
  Eigen::MatrixXd lambda_draws(out.n_converged, n_grid);
  Eigen::Index row = 0;
  for (const auto& rep : reps) {
    if (!rep.ok) continue;
    out.beta_draws.row(row) = rep.beta.transpose();
    out.gamma_draws.row(row) = rep.gamma.transpose();
    lambda_draws.row(row) = rep.lambda.transpose();
    ++row;
  }

  out.beta_se = column_sd(out.beta_draws);
  out.gamma_se = column_sd(out.gamma_draws);
  out.beta_ci_normal = normal_ci(fit.params.beta, out.beta_se);
  out.gamma_ci_normal = normal_ci(gamma_hat, out.gamma_se);
  out.beta_ci_percentile = percentile_ci(out.beta_draws);
  out.gamma_ci_percentile = percentile_ci(out.gamma_draws);

  out.lambda_band.resize(n_grid);
  for (int g = 0; g < n_grid; ++g) {
    std::vector<double> col(lambda_draws.col(g).data(),
                            lambda_draws.col(g).data() + lambda_draws.rows());
    std::sort(col.begin(), col.end());
    out.lambda_band[static_cast<std::size_t>(g)] = {t_grid[g], quantile_sorted(col, 0.025),
                                                    quantile_sorted(col, 0.975)};
  }
  return out;
}

double wald_p(double estimate, double se) {
  if (!(se > 0.0)) return 0.0;
  const double z = std::abs(estimate / se);
  return std::erfc(z / std::sqrt(2.0));
}

}  // namespace icmc
