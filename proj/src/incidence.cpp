#include "icmc/incidence.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

#include "icmc/numeric.hpp"

namespace icmc {

std::string engine_name(EngineKind kind) {
  switch (kind) {
    case EngineKind::kernel: return "kernel";
    case EngineKind::sieve: return "sieve";
    case EngineKind::logistic: return "logistic";
  }
  return "kernel";
}

EngineKind engine_from_name(const std::string& name) {
  if (name == "kernel") return EngineKind::kernel;
  if (name == "sieve") return EngineKind::sieve;
  if (name == "logistic") return EngineKind::logistic;
  throw std::invalid_argument("unknown incidence engine: " + name);
}

double epanechnikov(double u) {
  const double u2 = u * u;
  if (u2 > 5.0) return 0.0;
  return (3.0 - 0.6 * u2) / (4.0 * std::sqrt(5.0));
}

namespace {

// Training sample sorted by index value. The kernel support is bounded, so
// each evaluation point only touches a contiguous window of the sorted
// sample; sums always run in sorted order, independent of row order.
struct SortedSample {
  Eigen::VectorXd u;   // ascending
  Eigen::VectorXd resp;  // responses in the same order
  std::vector<Eigen::Index> origin;

  SortedSample(const Eigen::VectorXd& index, const Eigen::VectorXd& responses) {
    const auto n = index.size();
    origin.resize(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) origin[static_cast<std::size_t>(i)] = i;
    std::stable_sort(origin.begin(), origin.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return index[a] < index[b]; });
    u.resize(n);
    resp.resize(n);
    for (Eigen::Index p = 0; p < n; ++p) {
      u[p] = index[origin[static_cast<std::size_t>(p)]];
      resp[p] = responses[origin[static_cast<std::size_t>(p)]];
    }
  }

  // weighted sums over the window |u_j - at| <= radius
  void window_sums(double at, double h, double radius, double& num, double& den) const {
    const auto n = u.size();
    const double* base = u.data();
    const auto lo = static_cast<Eigen::Index>(
        std::lower_bound(base, base + n, at - radius) - base);
    const auto hi = static_cast<Eigen::Index>(
        std::upper_bound(base + lo, base + n, at + radius) - base);
    num = 0.0;
    den = 0.0;
    const double scale = 1.0 / (4.0 * std::sqrt(5.0));
    for (Eigen::Index j = lo; j < hi; ++j) {
      const double t = (at - u[j]) / h;
      const double w = (3.0 - 0.6 * t * t) * scale;
      num += w * resp[j];
      den += w;
    }
  }
};

}  // namespace

Eigen::VectorXd kernel_loo(const Eigen::VectorXd& index, const Eigen::VectorXd& responses,
                           double h) {
  if (!(h > 0.0)) throw std::invalid_argument("bandwidth must be positive");
  const auto n = index.size();
  const double fallback = responses.mean();
  const SortedSample sample(index, responses);
  const double radius = std::sqrt(5.0) * h;
  const double self_w = epanechnikov(0.0);
  Eigen::VectorXd out(n);
  for (Eigen::Index p = 0; p < n; ++p) {
    double num, den;
    sample.window_sums(sample.u[p], h, radius, num, den);
    num -= self_w * sample.resp[p];
    den -= self_w;
    out[sample.origin[static_cast<std::size_t>(p)]] = den > 1e-300 ? num / den : fallback;
  }
  return out;
}

Eigen::VectorXd kernel_predict(const Eigen::VectorXd& index_new,
                               const Eigen::VectorXd& index_train,
                               const Eigen::VectorXd& responses, double h) {
  const double fallback = responses.mean();
  const SortedSample sample(index_train, responses);
  const double radius = std::sqrt(5.0) * h;
  Eigen::VectorXd out(index_new.size());
  for (Eigen::Index i = 0; i < index_new.size(); ++i) {
    double num, den;
    sample.window_sums(index_new[i], h, radius, num, den);
    out[i] = den > 1e-300 ? num / den : fallback;
  }
  return out;
}

double q1_objective(const Eigen::VectorXd& e_b, const Eigen::VectorXd& p) {
  KahanSum q;
  for (Eigen::Index i = 0; i < e_b.size(); ++i) {
    const double pi = clamp_probability(p[i]);
    q.add(e_b[i] * std::log(pi) + (1.0 - e_b[i]) * std::log1p(-pi));
  }
  return q.value();
}

Eigen::VectorXd project_to_sphere(Eigen::VectorXd gamma) {
  const double norm = gamma.norm();
  if (!(norm > 0.0)) {
    gamma.setZero();
    gamma[0] = 1.0;
    return gamma;
  }
  gamma /= norm;
  if (gamma[0] < 0.0) gamma = -gamma;
  return gamma;
}

Eigen::VectorXd gamma_from_chart(const Eigen::VectorXd& theta) {
  Eigen::VectorXd gamma(theta.size() + 1);
  gamma[0] = 1.0;
  gamma.tail(theta.size()) = theta;
  return gamma / gamma.norm();
}

Eigen::VectorXd chart_from_gamma(const Eigen::VectorXd& gamma) {
  const double g0 = std::max(gamma[0], 1e-8);
  return gamma.tail(gamma.size() - 1) / g0;
}

namespace {

struct SimplexResult {
  Eigen::VectorXd x;
  double value = std::numeric_limits<double>::infinity();
};

// Nelder-Mead minimization; dimension is small (d1 - 1)
SimplexResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& fn,
                          const Eigen::VectorXd& x0, double step, int max_evals) {
  const auto dim = x0.size();
  std::vector<Eigen::VectorXd> pts;
  std::vector<double> vals;
  int evals = 0;
  auto eval = [&](const Eigen::VectorXd& x) {
    ++evals;
    const double v = fn(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };
  pts.push_back(x0);
  vals.push_back(eval(x0));
  for (Eigen::Index j = 0; j < dim; ++j) {
    Eigen::VectorXd p = x0;
    p[j] += step;
    pts.push_back(p);
    vals.push_back(eval(p));
  }
  const auto order = [&]() {
    std::vector<std::size_t> idx(pts.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return vals[a] < vals[b];
    });
    std::vector<Eigen::VectorXd> p2;
    std::vector<double> v2;
    for (std::size_t i : idx) {
      p2.push_back(pts[i]);
      v2.push_back(vals[i]);
    }
    pts.swap(p2);
    vals.swap(v2);
  };
  order();
  while (evals < max_evals) {
    if (vals.back() - vals.front() < 1e-10 * (1.0 + std::abs(vals.front()))) break;
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(dim);
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) centroid += pts[i];
    centroid /= static_cast<double>(pts.size() - 1);

    const Eigen::VectorXd reflect = centroid + (centroid - pts.back());
    const double f_r = eval(reflect);
    if (f_r < vals.front()) {
      const Eigen::VectorXd expand = centroid + 2.0 * (centroid - pts.back());
      const double f_e = eval(expand);
      if (f_e < f_r) {
        pts.back() = expand;
        vals.back() = f_e;
      } else {
        pts.back() = reflect;
        vals.back() = f_r;
      }
    } else if (f_r < vals[vals.size() - 2]) {
      pts.back() = reflect;
      vals.back() = f_r;
    } else {
      const Eigen::VectorXd contract = centroid + 0.5 * (pts.back() - centroid);
      const double f_c = eval(contract);
      if (f_c < vals.back()) {
        pts.back() = contract;
        vals.back() = f_c;
      } else {
        for (std::size_t i = 1; i < pts.size(); ++i) {
          pts[i] = pts.front() + 0.5 * (pts[i] - pts.front());
          vals[i] = eval(pts[i]);
        }
      }
    }
    order();
  }
  return {pts.front(), vals.front()};
}

// multi-start simplex maximization of q1 over the sphere chart
Eigen::VectorXd maximize_gamma(const std::function<double(const Eigen::VectorXd&)>& q1_of_gamma,
                               const Eigen::VectorXd& gamma_current, rng::Engine& restarts,
                               bool* failed) {
  const double q_current = q1_of_gamma(gamma_current);
  const Eigen::VectorXd theta0 = chart_from_gamma(gamma_current);
  auto neg = [&](const Eigen::VectorXd& theta) { return -q1_of_gamma(gamma_from_chart(theta)); };

  Eigen::VectorXd best_gamma = gamma_current;
  double best_q = q_current;
  const int dim = static_cast<int>(theta0.size());
  for (int start = 0; start < 3; ++start) {
    Eigen::VectorXd theta = theta0;
    if (start > 0) {
      for (Eigen::Index j = 0; j < theta.size(); ++j) theta[j] += 0.5 * rng::normal(restarts);
    }
    // the perturbed starts get a smaller budget; they guard against local
    // ridges of the piecewise-smooth objective rather than polish the optimum
    const int max_evals = (start == 0 ? 50 : 20) * (dim + 1);
    const SimplexResult res = nelder_mead(neg, theta, 0.1, max_evals);
    if (-res.value > best_q) {
      best_q = -res.value;
      best_gamma = gamma_from_chart(res.x);
    }
  }
  if (failed != nullptr) *failed = !std::isfinite(best_q);
  // ratchet: never return a point that lowers the objective
  if (!std::isfinite(best_q) || best_q < q_current - 1e-10) return gamma_current;
  return best_gamma;
}

Eigen::VectorXd clamp_vector(Eigen::VectorXd p) {
  for (Eigen::Index i = 0; i < p.size(); ++i) p[i] = clamp_probability(p[i]);
  return p;
}

struct SieveFit {
  SplineBasis basis;
  Eigen::VectorXd psi;
  Eigen::VectorXd fitted;
  bool ok = false;
};

// least-squares fit of the working responses on the B-spline design over the
// index range; fitted values clamped into (0, 1)
SieveFit fit_sieve_link(const Eigen::VectorXd& index, const Eigen::VectorXd& e_b,
                        const SieveConfig& cfg) {
  SieveFit fit;
  const double lo = index.minCoeff();
  const double hi = index.maxCoeff();
  if (!(hi > lo)) return fit;
  std::vector<double> values(index.data(), index.data() + index.size());
  fit.basis = make_basis_interval(lo, hi, values, cfg.degree, cfg.n_knots, cfg.placement);
  Eigen::MatrixXd design(index.size(), fit.basis.n_bspline());
  for (Eigen::Index i = 0; i < index.size(); ++i) {
    design.row(i) = eval_bspline(fit.basis, index[i]).transpose();
  }
  fit.psi = design.colPivHouseholderQr().solve(e_b);
  if (!fit.psi.allFinite()) return fit;
  fit.fitted = clamp_vector(design * fit.psi);
  fit.ok = true;
  return fit;
}

}  // namespace

double select_bandwidth(const Eigen::VectorXd& index, const Eigen::VectorXd& e_b,
                        const std::vector<double>& h_grid) {
  if (h_grid.empty()) throw std::invalid_argument("bandwidth grid must be nonempty");
  std::vector<double> grid(h_grid);
  std::sort(grid.begin(), grid.end());
  double best_h = grid.front();
  double best_cv = -std::numeric_limits<double>::infinity();
  for (double h : grid) {
    const double cv = q1_objective(e_b, kernel_loo(index, e_b, h));
    if (cv > best_cv) {
      best_cv = cv;
      best_h = h;
    }
  }
  return best_h;
}

IncidenceState update_gamma_kernel(const CureDataset& ds, const Eigen::VectorXd& e_b,
                                   const IncidenceState& current, rng::Engine& restarts) {
  IncidenceState next = current;
  next.update_warning = false;
  auto q1_of = [&](const Eigen::VectorXd& gamma) {
    return q1_objective(e_b, kernel_loo(ds.x_mat * gamma, e_b, current.h));
  };
  if (ds.d1 == 1) {
    next.gamma = Eigen::VectorXd::Ones(1);
  } else {
    bool failed = false;
    next.gamma = maximize_gamma(q1_of, project_to_sphere(current.gamma), restarts, &failed);
    next.update_warning = failed;
  }
  next.gamma = project_to_sphere(next.gamma);
  next.train_index = ds.x_mat * next.gamma;
  next.train_eb = e_b;
  next.fitted_p = clamp_vector(kernel_loo(next.train_index, e_b, next.h));
  return next;
}

IncidenceState update_sieve(const CureDataset& ds, const Eigen::VectorXd& e_b,
                            const IncidenceState& current, const SieveConfig& cfg,
                            rng::Engine& restarts) {
  IncidenceState next = current;
  next.update_warning = false;
  auto q1_of = [&](const Eigen::VectorXd& gamma) {
    const SieveFit fit = fit_sieve_link(ds.x_mat * gamma, e_b, cfg);
    if (!fit.ok) return -std::numeric_limits<double>::infinity();
    return q1_objective(e_b, fit.fitted);
  };
  if (ds.d1 == 1) {
    next.gamma = Eigen::VectorXd::Ones(1);
  } else {
    bool failed = false;
    next.gamma = maximize_gamma(q1_of, project_to_sphere(current.gamma), restarts, &failed);
    next.update_warning = failed;
  }
  next.gamma = project_to_sphere(next.gamma);
  const SieveFit fit = fit_sieve_link(ds.x_mat * next.gamma, e_b, cfg);
  if (fit.ok) {
    next.link_basis = fit.basis;
    next.psi = fit.psi;
    next.fitted_p = fit.fitted;
  } else {
    next.update_warning = true;
  }
  return next;
}

IncidenceState update_logistic(const CureDataset& ds, const Eigen::VectorXd& e_b,
                               const IncidenceState& current,
                               std::vector<std::string>* warnings) {
  const auto n = static_cast<Eigen::Index>(ds.size());
  const auto d = ds.d1;
  Eigen::MatrixXd design(n, d + 1);
  design.col(0).setOnes();
  design.rightCols(d) = ds.x_mat;

  Eigen::VectorXd coef(d + 1);
  coef[0] = current.gamma0;
  coef.tail(d) = current.gamma.size() == d ? current.gamma : Eigen::VectorXd::Zero(d);

  auto loglik = [&](const Eigen::VectorXd& c) {
    const Eigen::VectorXd lin = design * c;
    KahanSum s;
    for (Eigen::Index i = 0; i < n; ++i) {
      // e_b log(sigma) + (1 - e_b) log(1 - sigma), numerically safe form
      s.add(e_b[i] * lin[i] - std::log1p(std::exp(-std::abs(lin[i]))) -
            std::max(lin[i], 0.0));
    }
    return s.value();
  };

  double ll = loglik(coef);
  for (int iter = 0; iter < 50; ++iter) {
    const Eigen::VectorXd lin = design * coef;
    const Eigen::VectorXd mu = (1.0 / (1.0 + (-lin.array()).exp())).matrix();
    const Eigen::VectorXd grad = design.transpose() * (e_b - mu);
    if (grad.lpNorm<Eigen::Infinity>() < 1e-10) break;
    const Eigen::VectorXd w = mu.array() * (1.0 - mu.array()) + 1e-12;
    const Eigen::MatrixXd hess = design.transpose() * w.asDiagonal() * design;
    Eigen::VectorXd step = hess.ldlt().solve(grad);
    if (!step.allFinite()) break;
    double t = 1.0;
    while (t > 1e-8) {
      const double cand = loglik(coef + t * step);
      if (cand >= ll) {
        coef += t * step;
        ll = cand;
        break;
      }
      t *= 0.5;
    }
    if (t <= 1e-8) break;
  }

  bool clipped = false;
  for (Eigen::Index j = 0; j < coef.size(); ++j) {
    if (std::abs(coef[j]) > 50.0) {
      coef[j] = std::copysign(50.0, coef[j]);
      clipped = true;
    }
  }
  if (clipped && warnings != nullptr) {
    warnings->push_back("logistic incidence: separation detected, coefficients clipped");
  }

  IncidenceState next = current;
  next.engine = EngineKind::logistic;
  next.gamma0 = coef[0];
  next.gamma = coef.tail(d);
  const Eigen::VectorXd lin = design * coef;
  next.fitted_p = clamp_vector((1.0 / (1.0 + (-lin.array()).exp())).matrix());
  next.update_warning = clipped;
  return next;
}

Eigen::VectorXd predict_p(const IncidenceState& st, const Eigen::MatrixXd& x) {
  switch (st.engine) {
    case EngineKind::logistic: {
      const Eigen::VectorXd lin =
          (x * st.gamma).array() + st.gamma0;
      return clamp_vector((1.0 / (1.0 + (-lin.array()).exp())).matrix());
    }
    case EngineKind::kernel:
    case EngineKind::sieve:
      return predict_link(st, x * st.gamma);
  }
  throw std::logic_error("unreachable");
}

Eigen::VectorXd predict_link(const IncidenceState& st, const Eigen::VectorXd& u) {
  switch (st.engine) {
    case EngineKind::kernel:
      return clamp_vector(kernel_predict(u, st.train_index, st.train_eb, st.h));
    case EngineKind::sieve: {
      Eigen::VectorXd out(u.size());
      for (Eigen::Index i = 0; i < u.size(); ++i) {
        out[i] = eval_bspline(st.link_basis, u[i]).dot(st.psi);
      }
      return clamp_vector(std::move(out));
    }
    case EngineKind::logistic: {
      const Eigen::ArrayXd lin = u.array() + st.gamma0;
      return clamp_vector((1.0 / (1.0 + (-lin).exp())).matrix());
    }
  }
  throw std::logic_error("unreachable");
}

IncidenceState init_incidence(const CureDataset& ds, EngineKind engine, const SieveConfig& cfg,
                              const std::vector<double>& h_grid) {
  const auto n = static_cast<Eigen::Index>(ds.size());
  Eigen::VectorXd pseudo(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    pseudo[i] = ds.observations[static_cast<std::size_t>(i)].delta_r ? 0.0 : 1.0;
  }
  IncidenceState blank;
  blank.engine = EngineKind::logistic;
  blank.gamma = Eigen::VectorXd::Zero(ds.d1);
  IncidenceState logit = update_logistic(ds, pseudo, blank);
  if (engine == EngineKind::logistic) return logit;

  IncidenceState st;
  st.engine = engine;
  st.gamma = logit.gamma.norm() > 1e-12 ? project_to_sphere(logit.gamma)
                                        : project_to_sphere(Eigen::VectorXd::Ones(ds.d1));
  const Eigen::VectorXd index = ds.x_mat * st.gamma;
  if (engine == EngineKind::kernel) {
    st.h = select_bandwidth(index, pseudo, h_grid);
    st.train_index = index;
    st.train_eb = pseudo;
    st.fitted_p = clamp_vector(kernel_loo(index, pseudo, st.h));
  } else {
    const SieveFit fit = fit_sieve_link(index, pseudo, cfg);
    if (!fit.ok) throw NumericError("sieve initialization failed: degenerate index range");
    st.link_basis = fit.basis;
    st.psi = fit.psi;
    st.fitted_p = fit.fitted;
  }
  return st;
}

}  // namespace icmc
