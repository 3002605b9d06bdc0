#include <cmath>
#include <optional>

#include "doctest.h"
#include "icmc/estep.hpp"
#include "icmc/numeric.hpp"
#include "icmc/rng.hpp"
#include "icmc/simulate.hpp"

using icmc::CureDataset;
using icmc::EStepCache;
using icmc::Loads;
using icmc::Transformation;

namespace {

Eigen::VectorXd vec1(double v) { return Eigen::VectorXd::Constant(1, v); }

// one observation of each censoring type, in order left / interval / right
CureDataset three_types() {
  std::vector<icmc::IntervalObservation> obs;
  obs.push_back(icmc::make_observation(0.0, 1.0, vec1(0.1), vec1(0.2)));
  obs.push_back(icmc::make_observation(0.5, 1.5, vec1(-0.3), vec1(0.4)));
  obs.push_back(icmc::make_observation(1.2, icmc::infinity(), vec1(0.7), vec1(-0.1)));
  return CureDataset::from_observations(std::move(obs));
}

Loads loads_of(double n1_l, double n2_l, double n1_i, double n2_i, double n1_r) {
  Loads loads;
  loads.n1 = Eigen::Vector3d(n1_l, n1_i, n1_r);
  loads.n2 = {n2_l, n2_i, std::nullopt};
  return loads;
}

}  // namespace

TEST_SUITE("estep") {

TEST_CASE("expect_b hand values") {
  const CureDataset ds = three_types();
  const Eigen::VectorXd p = Eigen::Vector3d(0.5, 0.5, 0.5);

  // observed events are susceptible with certainty
  Eigen::VectorXd e_b = icmc::expect_b(Transformation(0.0), ds, loads_of(0, 1, 0.5, 1.5, 0), p);
  CHECK(e_b[0] == 1.0);
  CHECK(e_b[1] == 1.0);
  // no follow-up: posterior equals the prior
  CHECK(e_b[2] == doctest::Approx(0.5).epsilon(1e-12));

  const Eigen::VectorXd p6 = Eigen::Vector3d(0.6, 0.6, 0.6);
  e_b = icmc::expect_b(Transformation(1.0), ds, loads_of(0, 1, 0.5, 1.5, 1.0), p6);
  CHECK(e_b[2] == doctest::Approx(0.428571).epsilon(1e-5));
}

TEST_CASE("expect_xi_b hand values") {
  const CureDataset ds = three_types();
  const Eigen::VectorXd p = Eigen::Vector3d(0.5, 0.5, 0.5);

  // degenerate frailty: interval-censored subjects have xi B = 1 exactly
  Eigen::VectorXd v = icmc::expect_xi_b(Transformation(0.0), ds, loads_of(0, 1, 0.7, 1.9, 1), p);
  CHECK(v[1] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(v[2] == doctest::Approx(std::exp(-1.0) / (1.0 + std::exp(-1.0))).epsilon(1e-10));

  // proportional odds, left-censored branch at N2 = 1
  v = icmc::expect_xi_b(Transformation(1.0), ds, loads_of(0, 1, 0.7, 1.9, 1), p);
  CHECK(v[0] == doctest::Approx(1.5).epsilon(1e-12));
}

TEST_CASE("expect_poisson hand values") {
  const CureDataset ds = three_types();
  const double truncated_mean = 1.0 / (1.0 - std::exp(-1.0));  // ~1.581977

  auto [e_y, e_w] = icmc::expect_poisson(Transformation(0.0), ds, loads_of(0, 1, 1, 2, 1));
  CHECK(e_y[0] == doctest::Approx(truncated_mean).epsilon(1e-10));
  CHECK(e_y[1] == 0.0);
  CHECK(e_y[2] == 0.0);
  CHECK(e_w[1] == doctest::Approx(truncated_mean).epsilon(1e-10));
  CHECK(e_w[0] == 0.0);
  CHECK(e_w[2] == 0.0);
}

TEST_CASE("degenerate intervals are rejected") {
  const CureDataset ds = three_types();
  CHECK_THROWS_AS(icmc::expect_poisson(Transformation(0.0), ds, loads_of(0, 0, 1, 2, 1)),
                  icmc::NumericError);
  CHECK_THROWS_AS(icmc::expect_poisson(Transformation(0.0), ds, loads_of(0, 1, 2, 2, 1)),
                  icmc::NumericError);
}

TEST_CASE("tiny loads stay finite through the expm1 paths") {
  const CureDataset ds = three_types();
  const Eigen::VectorXd p = Eigen::Vector3d(0.5, 0.5, 0.5);
  for (double r : {0.0, 1.0, 2.0}) {
    const Loads tiny = loads_of(0, 1e-12, 1e-12, 2e-12, 1e-12);
    auto [e_y, e_w] = icmc::expect_poisson(Transformation(r), ds, tiny);
    CHECK(std::isfinite(e_y[0]));
    CHECK(e_y[0] == doctest::Approx(1.0).epsilon(1e-6));  // truncated mean -> 1 as N2 -> 0
    CHECK(std::isfinite(e_w[1]));
    const Eigen::VectorXd xi = icmc::expect_xi_b(Transformation(r), ds, tiny, p);
    CHECK(xi[0] == doctest::Approx(1.0 + r).epsilon(1e-6));
    CHECK(std::isfinite(xi[1]));
  }
}

TEST_CASE("compute_loads matches the direct sum") {
  const icmc::SimDataset sim = icmc::gen_dataset(icmc::ScenarioSpec::with_defaults(1, 1.0, 60, 3));
  const CureDataset& ds = sim.data;
  const icmc::SplineBasis basis =
      icmc::make_basis(ds.finite_endpoints, 3, 4, icmc::KnotPlacement::quantile);
  icmc::rng::Engine eng = icmc::rng::make_engine(9, 1);
  Eigen::VectorXd beta(ds.d2);
  for (Eigen::Index j = 0; j < ds.d2; ++j) beta[j] = icmc::rng::normal(eng) * 0.4;
  Eigen::VectorXd eta(basis.k);
  for (Eigen::Index l = 0; l < basis.k; ++l) eta[l] = icmc::rng::uniform(eng, 0.0, 1.0);

  const Loads loads = icmc::compute_loads(ds, beta, eta, basis);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& o = ds.observations[i];
    const double scale = std::exp(o.z.dot(beta));
    double direct = 0.0;
    const Eigen::VectorXd b_left = icmc::eval_ispline(basis, o.left);
    for (Eigen::Index l = 0; l < basis.k; ++l) direct += eta[l] * b_left[l];
    CHECK(loads.n1[static_cast<Eigen::Index>(i)] ==
          doctest::Approx(scale * direct).epsilon(1e-12));
    if (o.delta_r) {
      CHECK(!loads.n2[i].has_value());
    } else {
      REQUIRE(loads.n2[i].has_value());
      const Eigen::VectorXd b_right = icmc::eval_ispline(basis, o.right);
      double direct_r = 0.0;
      for (Eigen::Index l = 0; l < basis.k; ++l) direct_r += eta[l] * b_right[l];
      CHECK(*loads.n2[i] == doctest::Approx(scale * direct_r).epsilon(1e-12));
      CHECK(loads.n1[static_cast<Eigen::Index>(i)] <= *loads.n2[i] + 1e-12);
    }
  }
}

TEST_CASE("loads vanish at the origin and saturate at k") {
  std::vector<icmc::IntervalObservation> obs;
  obs.push_back(icmc::make_observation(0.0, 20.0, vec1(0.0), vec1(0.0)));
  const CureDataset ds = CureDataset::from_observations(std::move(obs));
  const icmc::SplineBasis basis = icmc::make_basis({1.0, 2.0, 3.0}, 3, 2,
                                                   icmc::KnotPlacement::even);
  const Loads loads = icmc::compute_loads(ds, Eigen::VectorXd::Zero(1),
                                          Eigen::VectorXd::Ones(basis.k), basis);
  CHECK(loads.n1[0] == 0.0);
  CHECK(*loads.n2[0] == doctest::Approx(static_cast<double>(basis.k)));
}

TEST_CASE("split_counts with a single basis function returns the totals") {
  const CureDataset ds = three_types();
  const icmc::SplineBasis basis = icmc::make_basis({0.8, 1.3, 2.0}, 1, 2,
                                                   icmc::KnotPlacement::even);
  // k = 3 here; to exercise k = 1 use a custom eta mask instead: zero out all
  // but one column and check the surviving column carries the total
  const icmc::DataBasis db = icmc::evaluate_basis(ds, basis);
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(basis.k);
  eta[0] = 0.7;
  const Eigen::VectorXd e_y = Eigen::Vector3d(1.4, 0.0, 0.0);
  const Eigen::VectorXd e_w = Eigen::Vector3d(0.0, 2.2, 0.0);
  const auto [y_il, w_il] = icmc::split_counts(e_y, e_w, eta, db, ds);
  CHECK(y_il(0, 0) == doctest::Approx(1.4));
  CHECK(y_il.row(0).tail(basis.k - 1).isZero(0.0));
  CHECK(w_il(1, 0) == doctest::Approx(2.2));
  CHECK(w_il.row(1).tail(basis.k - 1).isZero(0.0));
}

TEST_CASE("full estep cache satisfies its invariants on random parameters") {
  icmc::rng::Engine eng = icmc::rng::make_engine(11, 2);
  for (int rep = 0; rep < 5; ++rep) {
    const double r = std::vector<double>{0.0, 1.0, 2.0}[static_cast<std::size_t>(rep % 3)];
    const icmc::SimDataset sim =
        icmc::gen_dataset(icmc::ScenarioSpec::with_defaults(1, r, 80, 100 + rep));
    const CureDataset& ds = sim.data;
    const icmc::SplineBasis basis =
        icmc::make_basis(ds.finite_endpoints, 3, 5, icmc::KnotPlacement::quantile);
    const icmc::DataBasis db = icmc::evaluate_basis(ds, basis);
    Eigen::VectorXd beta(ds.d2);
    for (Eigen::Index j = 0; j < ds.d2; ++j) beta[j] = 0.3 * icmc::rng::normal(eng);
    Eigen::VectorXd eta(basis.k);
    for (Eigen::Index l = 0; l < basis.k; ++l) eta[l] = icmc::rng::uniform(eng, 0.05, 1.0);
    Eigen::VectorXd p(static_cast<Eigen::Index>(ds.size()));
    for (Eigen::Index i = 0; i < p.size(); ++i) p[i] = icmc::rng::uniform(eng, 0.2, 0.9);

    const EStepCache cache = icmc::run_estep(ds, db, Transformation(r), beta, eta, p);
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const auto idx = static_cast<Eigen::Index>(i);
      const auto& o = ds.observations[i];
      CHECK(cache.e_b[idx] >= 0.0);
      CHECK(cache.e_b[idx] <= 1.0);
      if (!o.delta_r) CHECK(cache.e_b[idx] == 1.0);
      CHECK(cache.e_xi_b[idx] >= 0.0);
      if (!o.delta_l) CHECK(cache.e_y[idx] == 0.0);
      if (!o.delta_i) CHECK(cache.e_w[idx] == 0.0);
      CHECK(cache.e_y_il.row(idx).sum() == doctest::Approx(cache.e_y[idx]).epsilon(1e-10));
      CHECK(cache.e_w_il.row(idx).sum() == doctest::Approx(cache.e_w[idx]).epsilon(1e-10));
      CHECK(cache.e_y_il.row(idx).minCoeff() >= 0.0);
      CHECK(cache.e_w_il.row(idx).minCoeff() >= 0.0);
    }
  }
}

TEST_CASE("closed forms agree with a conditional Monte-Carlo draw") {
  // quick version of the full oracle (the acceptance suite runs >= 1e6 draws)
  const CureDataset ds = three_types();
  const Transformation tr(1.0);
  const Eigen::VectorXd p = Eigen::Vector3d(0.55, 0.55, 0.55);
  const Loads loads = loads_of(0.0, 0.9, 0.6, 1.4, 0.8);
  const Eigen::VectorXd e_b = icmc::expect_b(tr, ds, loads, p);
  const Eigen::VectorXd e_xib = icmc::expect_xi_b(tr, ds, loads, p);
  const auto [e_y, e_w] = icmc::expect_poisson(tr, ds, loads);

  icmc::rng::Engine eng = icmc::rng::make_engine(2024, 0);
  const int draws = 200000;

  // left-censored: condition on Y > 0 with Y ~ Poisson(N2 xi)
  double sum_y = 0, sum_xi = 0;
  int acc = 0;
  for (int d = 0; d < draws; ++d) {
    const double xi = icmc::rng::gamma_frailty(eng, tr.r);
    const long y = icmc::rng::poisson(eng, *loads.n2[0] * xi);
    if (y > 0) {
      sum_y += static_cast<double>(y);
      sum_xi += xi;
      ++acc;
    }
  }
  CHECK(sum_y / acc == doctest::Approx(e_y[0]).epsilon(0.02));
  CHECK(sum_xi / acc == doctest::Approx(e_xib[0]).epsilon(0.02));

  // right-censored: condition on no event before L under B ~ Bernoulli(p)
  double sum_b = 0, sum_xib = 0;
  acc = 0;
  for (int d = 0; d < draws; ++d) {
    const double xi = icmc::rng::gamma_frailty(eng, tr.r);
    const bool b = icmc::rng::bernoulli(eng, p[2]);
    if (b && icmc::rng::poisson(eng, loads.n1[2] * xi) > 0) continue;  // event observed: reject
    sum_b += b ? 1.0 : 0.0;
    sum_xib += b ? xi : 0.0;
    ++acc;
  }
  CHECK(sum_b / acc == doctest::Approx(e_b[2]).epsilon(0.02));
  CHECK(sum_xib / acc == doctest::Approx(e_xib[2]).epsilon(0.03));
}

}  // TEST_SUITE
