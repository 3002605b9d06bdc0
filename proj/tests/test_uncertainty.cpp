#include <cmath>

#include "doctest.h"
#include "icmc/json_io.hpp"
#include "icmc/simulate.hpp"
#include "icmc/uncertainty.hpp"

using icmc::BootstrapResult;
using icmc::EngineKind;
using icmc::FitConfig;
using icmc::FitResult;

namespace {

FitConfig logistic_config(std::uint64_t seed = 3) {
  FitConfig cfg;
  cfg.engine = EngineKind::logistic;
  cfg.r = 0.0;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_SUITE("uncertainty") {

TEST_CASE("wald p-values") {
  CHECK(icmc::wald_p(0.0, 0.2) == doctest::Approx(1.0));
  CHECK(icmc::wald_p(1.96, 1.0) == doctest::Approx(0.05).epsilon(2e-3));
  CHECK(icmc::wald_p(0.59, 0.20) == doctest::Approx(0.0032).epsilon(0.05));
  CHECK(icmc::wald_p(1.0, 0.0) == 0.0);  // degenerate se reported as 0
}

TEST_CASE("identical resample indices reproduce the point estimate") {
  const icmc::SimDataset sim = icmc::gen_dataset(icmc::ScenarioSpec::with_defaults(1, 0.0, 120, 31));
  std::vector<std::size_t> idx(sim.data.size());
  icmc::rng::Engine eng = icmc::rng::make_engine(17, 0);
  for (auto& v : idx) v = icmc::rng::uniform_index(eng, sim.data.size());
  const icmc::CureDataset resample = icmc::subset(sim.data, idx);
  const FitResult a = icmc::fit_em(resample, logistic_config());
  const FitResult b = icmc::fit_em(resample, logistic_config());
  CHECK((a.params.beta - b.params.beta).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(a.loglik == b.loglik);  // sd over identical replicates is exactly 0
}

TEST_CASE("bootstrap on a small dataset produces ordered finite intervals") {
  const icmc::SimDataset sim = icmc::gen_dataset(icmc::ScenarioSpec::with_defaults(1, 0.0, 140, 32));
  const FitConfig cfg = logistic_config();
  const FitResult fit = icmc::fit_em(sim.data, cfg);
  const BootstrapResult boot = icmc::bootstrap(sim.data, cfg, 12, 5, fit);
  CHECK(boot.b == 12);
  CHECK(boot.n_converged >= 10);
  CHECK((boot.beta_se.array() >= 0.0).all());
  CHECK((boot.gamma_se.array() >= 0.0).all());
  CHECK(boot.gamma_se.size() == sim.data.d1 + 1);  // intercept included for logistic
  for (const auto& iv : boot.beta_ci_percentile) CHECK(iv.lo <= iv.hi);
  for (const auto& iv : boot.beta_ci_normal) CHECK(iv.lo <= iv.hi);
  for (const auto& row : boot.lambda_band) {
    CHECK(row[1] <= row[2]);
    CHECK(row[1] >= 0.0);
  }
  CHECK_THROWS_AS(icmc::bootstrap(sim.data, cfg, 1, 5, fit), std::invalid_argument);

  const nlohmann::json j = icmc::bootstrap_to_json(boot, fit);
  CHECK(j.at("b") == 12);
  CHECK(j.at("lambda_band").size() == boot.lambda_band.size());
}

TEST_CASE("thread count does not change bootstrap results") {
  const icmc::SimDataset sim = icmc::gen_dataset(icmc::ScenarioSpec::with_defaults(1, 0.0, 110, 33));
  const FitConfig cfg = logistic_config();
  const FitResult fit = icmc::fit_em(sim.data, cfg);
  const BootstrapResult one = icmc::bootstrap(sim.data, cfg, 10, 9, fit, false, 1);
  const BootstrapResult two = icmc::bootstrap(sim.data, cfg, 10, 9, fit, false, 2);
  CHECK((one.beta_se - two.beta_se).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((one.gamma_se - two.gamma_se).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(one.replicate_status == two.replicate_status);
}

TEST_CASE("doubling the replicate count moves SEs only moderately") {
  const icmc::SimDataset sim = icmc::gen_dataset(icmc::ScenarioSpec::with_defaults(1, 0.0, 160, 34));
  const FitConfig cfg = logistic_config();
  const FitResult fit = icmc::fit_em(sim.data, cfg);
  const BootstrapResult small = icmc::bootstrap(sim.data, cfg, 16, 2, fit);
  const BootstrapResult large = icmc::bootstrap(sim.data, cfg, 32, 2, fit);
  for (Eigen::Index j = 0; j < small.beta_se.size(); ++j) {
    CHECK(std::abs(large.beta_se[j] - small.beta_se[j]) < 0.5 * small.beta_se[j]);
  }
}

}  // TEST_SUITE
