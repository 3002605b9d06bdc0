#include <cmath>

#include "doctest.h"
#include "icmc/estep.hpp"
#include "icmc/mstep.hpp"
#include "icmc/rng.hpp"
#include "icmc/simulate.hpp"
#include "test_oracles.hpp"

using icmc::CureDataset;
using icmc::EStepCache;
using icmc::Transformation;

namespace {

struct Setup {
  CureDataset ds;
  icmc::SplineBasis basis;
  icmc::DataBasis db;
  Eigen::MatrixXd risk;
  EStepCache cache;
  Eigen::VectorXd beta0;
  Eigen::VectorXd eta0;
};

Setup random_setup(int n, double r, std::uint64_t seed) {
  Setup s;
  const icmc::SimDataset sim = icmc::gen_dataset(icmc::ScenarioSpec::with_defaults(1, r, n, seed));
  s.ds = sim.data;
  s.basis = icmc::make_basis(s.ds.finite_endpoints, 3, 5, icmc::KnotPlacement::quantile);
  s.db = icmc::evaluate_basis(s.ds, s.basis);
  s.risk = icmc::risk_matrix(s.ds, s.db);
  icmc::rng::Engine eng = icmc::rng::make_engine(seed, 0xface);
  s.beta0.resize(s.ds.d2);
  for (Eigen::Index j = 0; j < s.ds.d2; ++j) s.beta0[j] = 0.3 * icmc::rng::normal(eng);
  s.eta0.resize(s.basis.k);
  for (Eigen::Index l = 0; l < s.basis.k; ++l) s.eta0[l] = icmc::rng::uniform(eng, 0.1, 1.0);
  Eigen::VectorXd p(static_cast<Eigen::Index>(s.ds.size()));
  for (Eigen::Index i = 0; i < p.size(); ++i) p[i] = icmc::rng::uniform(eng, 0.2, 0.9);
  s.cache = icmc::run_estep(s.ds, s.db, Transformation(r), s.beta0, s.eta0, p);
  return s;
}

}  // namespace

TEST_SUITE("mstep") {

TEST_CASE("risk matrix picks the correct endpoint per censoring type") {
  const Setup s = random_setup(50, 0.0, 17);
  for (std::size_t i = 0; i < s.ds.size(); ++i) {
    const auto idx = static_cast<Eigen::Index>(i);
    if (s.ds.observations[i].delta_r) {
      CHECK(s.risk.row(idx) == s.db.at_left.row(idx));
    } else {
      CHECK(s.risk.row(idx) == s.db.at_right.row(idx));
    }
  }
}

TEST_CASE("eta closed form for a single subject and basis column") {
  // one left-censored subject, degenerate frailty, endpoint past the basis
  // boundary so b(R) = 1 for every component
  std::vector<icmc::IntervalObservation> obs;
  obs.push_back(icmc::make_observation(0.0, 10.0, Eigen::VectorXd::Zero(1),
                                       Eigen::VectorXd::Constant(1, 0.5)));
  const CureDataset ds = CureDataset::from_observations(std::move(obs));
  const icmc::SplineBasis basis = icmc::make_basis({1.0, 2.0}, 1, 2, icmc::KnotPlacement::even);
  const icmc::DataBasis db = icmc::evaluate_basis(ds, basis);
  const Eigen::MatrixXd risk = icmc::risk_matrix(ds, db);

  const Eigen::VectorXd beta = Eigen::VectorXd::Constant(1, 0.8);
  Eigen::VectorXd eta_cur = Eigen::VectorXd::Constant(basis.k, 1.0 / basis.k);
  const EStepCache cache = icmc::run_estep(ds, db, Transformation(0.0), beta,
                                           eta_cur, Eigen::VectorXd::Constant(1, 0.5));
  const Eigen::VectorXd eta = icmc::eta_of_beta(cache, ds, beta, risk);
  // by hand: eta_l = E(Y_l) / [exp(beta.z) E(xi B) b_l(R)] with b_l(R) = 1
  const double scale = std::exp(0.8 * 0.5);
  for (Eigen::Index l = 0; l < basis.k; ++l) {
    const double expect = cache.e_y_il(0, l) / (scale * cache.e_xi_b[0]);
    CHECK(eta[l] == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("eta is a stationary point of the minorizer in every coordinate") {
  for (std::uint64_t seed : {31ULL, 32ULL}) {
    const Setup s = random_setup(120, seed == 31 ? 0.0 : 1.0, seed);
    const Eigen::VectorXd eta = icmc::eta_of_beta(s.cache, s.ds, s.beta0, s.risk);
    for (Eigen::Index l = 0; l < eta.size(); ++l) {
      REQUIRE(eta[l] >= 0.0);
      if (eta[l] == 0.0) continue;
      const long double h = 1e-6L * static_cast<long double>(eta[l]);
      Eigen::VectorXd hi = eta, lo = eta;
      hi[l] += static_cast<double>(h);
      lo[l] -= static_cast<double>(h);
      const long double fd = (oracle::q2_longdouble(s.cache, s.ds, s.risk, s.beta0, hi) -
                              oracle::q2_longdouble(s.cache, s.ds, s.risk, s.beta0, lo)) /
                             (2.0L * h);
      CHECK(std::abs(static_cast<double>(fd)) < 1e-8);
    }
  }
}

TEST_CASE("zero-count columns get zero eta without errors") {
  const Setup s = random_setup(60, 0.0, 33);
  EStepCache cache = s.cache;
  cache.e_y_il.col(2).setZero();
  cache.e_w_il.col(2).setZero();
  const Eigen::VectorXd eta = icmc::eta_of_beta(cache, s.ds, s.beta0, s.risk);
  CHECK(eta[2] == 0.0);
  CHECK((eta.array() >= 0.0).all());
}

TEST_CASE("profile score vanishes at the solved beta") {
  for (std::uint64_t seed = 50; seed < 53; ++seed) {
    const Setup s = random_setup(100, seed == 50 ? 1.0 : 0.0, seed);
    const icmc::BetaSolve solve = icmc::solve_beta(s.cache, s.ds, s.risk, s.beta0);
    CHECK(solve.converged);
    const Eigen::VectorXd score = icmc::profile_score(s.cache, s.ds, s.risk, solve.beta);
    CHECK(score.lpNorm<Eigen::Infinity>() < 1e-8);
  }
}

TEST_CASE("no latency covariates solves vacuously") {
  Setup s = random_setup(40, 0.0, 60);
  std::vector<icmc::IntervalObservation> obs;
  for (const auto& o : s.ds.observations) {
    obs.push_back(icmc::make_observation(o.left, o.right, o.x, Eigen::VectorXd()));
  }
  const CureDataset ds0 = CureDataset::from_observations(std::move(obs));
  const icmc::DataBasis db = icmc::evaluate_basis(ds0, s.basis);
  const Eigen::MatrixXd risk = icmc::risk_matrix(ds0, db);
  const EStepCache cache = icmc::run_estep(
      ds0, db, Transformation(0.0), Eigen::VectorXd(), s.eta0,
      Eigen::VectorXd::Constant(static_cast<Eigen::Index>(ds0.size()), 0.5));
  const icmc::BetaSolve solve = icmc::solve_beta(cache, ds0, risk, Eigen::VectorXd());
  CHECK(solve.converged);
  CHECK(solve.beta.size() == 0);
}

TEST_CASE("analytic jacobian of the profile score matches finite differences") {
  for (std::uint64_t seed : {70ULL, 71ULL}) {
    const Setup s = random_setup(90, 1.0, seed);
    const Eigen::MatrixXd analytic =
        icmc::profile_score_jacobian(s.cache, s.ds, s.risk, s.beta0);
    Eigen::MatrixXd fd(s.beta0.size(), s.beta0.size());
    for (Eigen::Index j = 0; j < s.beta0.size(); ++j) {
      const double h = 1e-6 * std::max(1.0, std::abs(s.beta0[j]));
      Eigen::VectorXd hi = s.beta0, lo = s.beta0;
      hi[j] += h;
      lo[j] -= h;
      fd.col(j) = (icmc::profile_score(s.cache, s.ds, s.risk, hi) -
                   icmc::profile_score(s.cache, s.ds, s.risk, lo)) /
                  (2.0 * h);
    }
    const double rel = (analytic - fd).norm() / fd.norm();
    CHECK(rel < 1e-5);
  }
}

TEST_CASE("the m-step never lowers the minorizer") {
  for (std::uint64_t seed = 80; seed < 83; ++seed) {
    const Setup s = random_setup(110, 2.0, seed);
    const double before = icmc::q2_objective(s.cache, s.ds, s.risk, s.beta0, s.eta0);
    const icmc::BetaSolve solve = icmc::solve_beta(s.cache, s.ds, s.risk, s.beta0);
    const Eigen::VectorXd eta = icmc::eta_of_beta(s.cache, s.ds, solve.beta, s.risk);
    const double after = icmc::q2_objective(s.cache, s.ds, s.risk, solve.beta, eta);
    CHECK(after >= before - 1e-10);
  }
}

}  // TEST_SUITE
