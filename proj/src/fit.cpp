#include "icmc/fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>

#include "icmc/estep.hpp"
#include "icmc/mstep.hpp"
#include "icmc/numeric.hpp"

namespace icmc {

void FitConfig::check() const {
  if (!(r >= 0.0) || !std::isfinite(r)) throw std::invalid_argument("r must be finite and >= 0");
  if (max_iter < 1) throw std::invalid_argument("max_iter must be >= 1");
  if (!(tol_param > 0.0) || !(tol_loglik > 0.0)) {
    throw std::invalid_argument("tolerances must be positive");
  }
  if (h_grid.empty()) throw std::invalid_argument("bandwidth grid must be nonempty");
  for (double h : h_grid) {
    if (!(h > 0.0)) throw std::invalid_argument("bandwidths must be positive");
  }
}

double observed_loglik(const CureDataset& ds, const ModelParams& params,
                       const Eigen::VectorXd& p) {
  KahanSum ll;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& o = ds.observations[i];
    const double bz = o.z.dot(params.beta);
    const double lambda_l = eval_ispline(params.basis, o.left).dot(params.eta);
    const double pi = clamp_probability(p[static_cast<Eigen::Index>(i)]);
    double factor;
    if (o.delta_r) {
      factor = 1.0 - pi + pi * survival_u(params.tr, lambda_l, bz);
    } else {
      const double lambda_r = eval_ispline(params.basis, o.right).dot(params.eta);
      const double s_r = survival_u(params.tr, lambda_r, bz);
      if (o.delta_l) {
        factor = pi * (1.0 - s_r);
      } else {
        factor = pi * (survival_u(params.tr, lambda_l, bz) - s_r);
      }
    }
    ll.add(std::log(std::max(factor, 1e-300)));
  }
  return ll.value();
}

double observed_loglik(const CureDataset& ds, const ModelParams& params) {
  return observed_loglik(ds, params, predict_p(params.incidence, ds.x_mat));
}

CureDataset apply_standardization(const CureDataset& ds, const Standardization& st) {
  if (!st.applied) return ds;
  CureDataset out = ds;
  for (auto& o : out.observations) {
    o.x = ((o.x - st.x_mean).array() / st.x_sd.array()).matrix();
    o.z = ((o.z - st.z_mean).array() / st.z_sd.array()).matrix();
  }
  return CureDataset::from_observations(std::move(out.observations));
}

double score_loglik(const FitResult& fit, const CureDataset& ds) {
  if (!fit.standardization.applied) return observed_loglik(ds, fit.params);
  const CureDataset scaled = apply_standardization(ds, fit.standardization);
  return observed_loglik(scaled, fit.params);
}

namespace {

int parameter_count(const FitResult& fit, const CureDataset& ds) {
  const int d1 = static_cast<int>(ds.d1);
  const int d2 = static_cast<int>(ds.d2);
  const int k = static_cast<int>(fit.params.eta.size());
  switch (fit.params.incidence.engine) {
    case EngineKind::kernel: return (d1 - 1) + d2 + k + 1;
    case EngineKind::sieve:
      return (d1 - 1) + d2 + k + static_cast<int>(fit.params.incidence.psi.size());
    case EngineKind::logistic: return (d1 + 1) + d2 + k;
  }
  return 0;
}

double param_delta(const ModelParams& a, const ModelParams& b) {
  double d = 0.0;
  auto track = [&d](const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
    if (u.size() == v.size() && u.size() > 0) {
      d = std::max(d, (u - v).lpNorm<Eigen::Infinity>());
    }
  };
  track(a.beta, b.beta);
  track(a.eta, b.eta);
  track(a.incidence.gamma, b.incidence.gamma);
  if (a.incidence.engine == EngineKind::logistic) {
    d = std::max(d, std::abs(a.incidence.gamma0 - b.incidence.gamma0));
  }
  return d;
}

}  // namespace

FitResult fit_em(const CureDataset& ds_in, const FitConfig& config, const ModelParams* warm) {
  config.check();
  require_valid(ds_in);

  FitResult fit;
  fit.n_obs = ds_in.size();

  CureDataset scaled;
  const CureDataset* ds = &ds_in;
  if (config.standardize) {
    scaled = ds_in;
    fit.standardization = standardize(scaled);
    ds = &scaled;
  }

  const auto n = ds->size();
  std::size_t n_right = 0;
  for (const auto& o : ds->observations) n_right += o.delta_r ? 1 : 0;
  if (n_right == 0) fit.warnings.push_back("no cure signal: dataset has no right-censored subjects");
  if (n_right == n) throw DataError("all subjects right-censored: latency is unidentifiable");

  ModelParams& params = fit.params;
  params.tr = Transformation(config.r);
  params.basis = make_basis(ds->finite_endpoints, config.spline_degree, config.n_knots,
                            config.placement);
  for (const auto& w : params.basis.warnings) fit.warnings.push_back("spline basis: " + w);

  const DataBasis db = evaluate_basis(*ds, params.basis);
  const Eigen::MatrixXd risk = risk_matrix(*ds, db);
  const SieveConfig sieve_cfg{config.spline_degree, config.sieve_knots, config.placement};

  params.incidence = init_incidence(*ds, config.engine, sieve_cfg, config.h_grid);
  params.beta = Eigen::VectorXd::Zero(ds->d2);
  params.eta = Eigen::VectorXd::Constant(
      params.basis.k, config.eta_init_ones ? 1.0 : 1.0 / static_cast<double>(params.basis.k));

  if (warm != nullptr) {
    if (warm->beta.size() == params.beta.size()) params.beta = warm->beta;
    if (warm->eta.size() == params.eta.size()) params.eta = warm->eta;
    if (warm->incidence.engine == config.engine && warm->incidence.gamma.size() == ds->d1) {
      params.incidence.gamma = warm->incidence.gamma;
      params.incidence.gamma0 = warm->incidence.gamma0;
      params.incidence.h = warm->incidence.h;
      // engine internals are sized for the warm fit's dataset; refit the link
      // at the warm direction on pseudo-responses before the first E-step
      Eigen::VectorXd pseudo(static_cast<Eigen::Index>(n));
      for (std::size_t i = 0; i < n; ++i) {
        pseudo[static_cast<Eigen::Index>(i)] = ds->observations[i].delta_r ? 0.0 : 1.0;
      }
      if (config.engine == EngineKind::kernel) {
        params.incidence.train_index = ds->x_mat * params.incidence.gamma;
        params.incidence.train_eb = pseudo;
        params.incidence.fitted_p =
            kernel_loo(params.incidence.train_index, pseudo, params.incidence.h)
                .unaryExpr([](double v) { return clamp_probability(v); });
      } else if (config.engine == EngineKind::sieve) {
        rng::Engine warm_rng = rng::make_engine(config.seed, 0x5eed);
        params.incidence = update_sieve(*ds, pseudo, params.incidence, sieve_cfg, warm_rng);
      } else {
        params.incidence = update_logistic(*ds, pseudo, params.incidence);
      }
    }
  }

  rng::Engine restarts = rng::make_engine(config.seed, 0xa11ce);
  double ll = observed_loglik(*ds, params, params.incidence.fitted_p);
  fit.loglik_trace.push_back(ll);

  bool warned_decrease = false;
  bool warned_beta = false;
  ModelParams prev = params;
  for (int iter = 1; iter <= config.max_iter; ++iter) {
    fit.n_iter = iter;
    prev = params;
    const double ll_prev = ll;

    const EStepCache cache = run_estep(*ds, db, params.tr, params.beta, params.eta,
                                       params.incidence.fitted_p);

    switch (config.engine) {
      case EngineKind::kernel: {
        if ((iter - 1) % std::max(config.bandwidth_refresh, 1) == 0) {
          const Eigen::VectorXd index = ds->x_mat * params.incidence.gamma;
          params.incidence.h = select_bandwidth(index, cache.e_b, config.h_grid);
        }
        params.incidence = update_gamma_kernel(*ds, cache.e_b, params.incidence, restarts);
        break;
      }
      case EngineKind::sieve:
        params.incidence = update_sieve(*ds, cache.e_b, params.incidence, sieve_cfg, restarts);
        break;
      case EngineKind::logistic:
        params.incidence = update_logistic(*ds, cache.e_b, params.incidence, &fit.warnings);
        break;
    }
    if (params.incidence.update_warning) {
      fit.warnings.push_back("incidence update kept previous direction at iteration " +
                             std::to_string(iter));
    }

    const BetaSolve solve = solve_beta(cache, *ds, risk, params.beta);
    if (!solve.converged && !warned_beta) {
      fit.warnings.push_back("beta score solve not fully converged at iteration " +
                             std::to_string(iter));
      warned_beta = true;
    }
    params.beta = solve.beta;
    params.eta = eta_of_beta(cache, *ds, params.beta, risk, &fit.warnings);

    ll = observed_loglik(*ds, params, params.incidence.fitted_p);
    fit.loglik_trace.push_back(ll);

    if (ll < ll_prev - 1e-6) {
      if (config.engine == EngineKind::logistic) {
        throw NumericError("EM ascent violated for the logistic engine at iteration " +
                           std::to_string(iter));
      }
      if (!warned_decrease) {
        fit.warnings.push_back("log-likelihood decreased at iteration " + std::to_string(iter) +
                               " (nonparametric link refit)");
        warned_decrease = true;
      }
    }

    const double d_param = param_delta(params, prev);
    const double d_ll = std::abs(ll - ll_prev) / std::max(1.0, std::abs(ll));
    if (d_param < config.tol_param || d_ll < config.tol_loglik) {
      fit.converged = true;
      break;
    }
  }
  if (!fit.converged) {
    fit.warnings.push_back("EM stopped at max_iter without meeting the tolerance");
  }

  fit.loglik = ll;
  fit.n_parameters = parameter_count(fit, *ds);
  fit.aic = -2.0 * fit.loglik + 2.0 * fit.n_parameters;
  fit.bic = -2.0 * fit.loglik + std::log(static_cast<double>(n)) * fit.n_parameters;
  return fit;
}

RGridResult fit_r_grid(const CureDataset& train, const CureDataset& valid,
                       const FitConfig& config, const std::vector<double>& r_grid,
                       unsigned n_threads) {
  if (r_grid.empty()) throw std::invalid_argument("r grid must be nonempty");
  std::vector<double> grid(r_grid);
  std::sort(grid.begin(), grid.end());

  struct Cell {
    bool ok = false;
    double score = -std::numeric_limits<double>::infinity();
    FitResult fit;
    std::string error;
  };
  std::vector<Cell> cells(grid.size());
  parallel_for(grid.size(), [&](std::size_t g) {
    FitConfig cfg = config;
    cfg.r = grid[g];
    try {
      cells[g].fit = fit_em(train, cfg);
      cells[g].score = score_loglik(cells[g].fit, valid);
      cells[g].ok = std::isfinite(cells[g].score);
    } catch (const std::exception& ex) {
      cells[g].error = ex.what();
    }
  }, n_threads);

  RGridResult result;
  std::size_t best = grid.size();
  for (std::size_t g = 0; g < grid.size(); ++g) {
    if (!cells[g].ok) {
      result.warnings.push_back("r = " + format_double(grid[g], 6) + " skipped: " +
                                cells[g].error);
      continue;
    }
    result.profile.push_back({grid[g], cells[g].score});
    if (best == grid.size() || cells[g].score > cells[best].score) best = g;
  }
  if (best == grid.size()) throw NumericError("every fit in the r grid failed");
  result.best_r = grid[best];
  result.best_fit = std::move(cells[best].fit);
  return result;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    std::size_t n, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0) || !(train_fraction < 1.0)) {
    throw std::invalid_argument("train fraction must lie strictly between 0 and 1");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  rng::Engine eng = rng::make_engine(seed, 0x511f7);
  for (std::size_t i = n; i > 1; --i) {
    std::swap(order[i - 1], order[rng::uniform_index(eng, i)]);
  }
  const auto n_train = static_cast<std::size_t>(std::round(train_fraction * n));
  std::vector<std::size_t> train(order.begin(), order.begin() + n_train);
  std::vector<std::size_t> valid(order.begin() + n_train, order.end());
  std::sort(train.begin(), train.end());
  std::sort(valid.begin(), valid.end());
  return {train, valid};
}

}  // namespace icmc
