#include <cmath>

#include "doctest.h"
#include "icmc/simulate.hpp"
#include "icmc/transform.hpp"

using icmc::ScenarioSpec;
using icmc::SimDataset;
using icmc::Transformation;

TEST_SUITE("simulate") {

TEST_CASE("incidence links at the origin") {
  CHECK(icmc::link_value(1, 0.0) == doctest::Approx(0.5));
  CHECK(icmc::link_value(2, 0.0) == doctest::Approx(0.5));
  CHECK(icmc::link_value(3, 0.0) ==
        doctest::Approx(1.0 / (1.0 + std::exp(-0.85))).epsilon(1e-10));  // ~0.70057
  CHECK_THROWS_AS(icmc::link_value(4, 0.0), std::invalid_argument);
}

TEST_CASE("scenario 1 population cure fraction is close to 38 percent") {
  icmc::rng::Engine eng = icmc::rng::make_engine(123, 0);
  double uncured = 0.0;
  const int n = 1000000;
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector3d x(icmc::rng::uniform(eng, -1.0, 2.0), icmc::rng::normal(eng),
                            icmc::rng::bernoulli(eng, 0.5) ? 1.0 : 0.0);
    uncured += icmc::gen_incidence(1, x);
  }
  CHECK(std::abs((1.0 - uncured / n) - 0.38) <= 0.01);
}

TEST_CASE("baseline hazard inversion is self consistent") {
  for (double target : {0.01, 0.3, 1.0, 4.0, 25.0}) {
    const double t = icmc::invert_baseline(target);
    CHECK(icmc::baseline_cum_hazard(t) == doctest::Approx(target).epsilon(1e-9));
  }
  CHECK(icmc::invert_baseline(0.0) == 0.0);
}

TEST_CASE("event times shrink to zero as the survival draw approaches one") {
  const Transformation tr(0.0);
  CHECK(icmc::gen_event_time(tr, 0.0, 1.0 - 1e-12) < 1e-6);
  CHECK_THROWS_AS(icmc::gen_event_time(tr, 0.0, 0.0), std::invalid_argument);
}

TEST_CASE("event draw at exp(-1) solves Lambda0 = 1 in the PH model") {
  const double t = icmc::gen_event_time(Transformation(0.0), 0.0, std::exp(-1.0));
  const double lambda = icmc::baseline_cum_hazard(t);
  CHECK(lambda >= 1.0 - 1e-9);
  CHECK(lambda <= 1.0 + 1e-9);
}

TEST_CASE("empirical survival of generated event times matches the model") {
  const Transformation tr(1.0);
  const double bz = 0.3;
  icmc::rng::Engine eng = icmc::rng::make_engine(55, 0);
  const int n = 100000;
  std::vector<double> times(n);
  for (int i = 0; i < n; ++i) {
    times[static_cast<std::size_t>(i)] = icmc::gen_event_time(tr, bz, icmc::rng::uniform_pos(eng));
  }
  for (double t : {0.05, 0.1, 0.2, 0.35, 0.5, 0.8, 1.2, 1.7, 2.5, 4.0}) {
    double surv = 0.0;
    for (double ti : times) surv += ti > t ? 1.0 : 0.0;
    surv /= n;
    const double expect = icmc::survival_u(tr, icmc::baseline_cum_hazard(t), bz);
    CHECK(std::abs(surv - expect) < 0.01);
  }
}

TEST_CASE("censoring intervals bracket the event time") {
  icmc::rng::Engine eng = icmc::rng::make_engine(66, 0);
  const icmc::CensorTuning tuning{12, 2.0};
  for (int rep = 0; rep < 2000; ++rep) {
    const double t = icmc::rng::uniform(eng, 0.0, 3.0);
    const auto [left, right] = icmc::censor_interval(t, tuning, eng);
    CHECK(left < t);
    if (std::isfinite(right)) {
      CHECK(right >= t);
    } else {
      CHECK(left <= tuning.horizon);
    }
  }
}

TEST_CASE("cured subjects are right-censored at the last examination") {
  icmc::rng::Engine eng = icmc::rng::make_engine(67, 0);
  const icmc::CensorTuning tuning{5, 2.0};
  for (int rep = 0; rep < 50; ++rep) {
    const auto [left, right] = icmc::censor_interval(icmc::infinity(), tuning, eng);
    CHECK(std::isinf(right));
    CHECK(left > 0.0);
    CHECK(left <= tuning.horizon);
  }
}

TEST_CASE("events before the first exam are left-censored") {
  icmc::rng::Engine eng = icmc::rng::make_engine(68, 0);
  const icmc::CensorTuning tuning{4, 2.0};
  for (int rep = 0; rep < 200; ++rep) {
    const auto [left, right] = icmc::censor_interval(1e-9, tuning, eng);
    CHECK(left == 0.0);
    CHECK(std::isfinite(right));
  }
}

TEST_CASE("generated datasets are valid with one-hot indicators") {
  for (int scenario : {1, 2, 3}) {
    const SimDataset sim =
        icmc::gen_dataset(ScenarioSpec::with_defaults(scenario, 1.0, 300, 70 + scenario));
    CHECK(icmc::validate(sim.data).empty());
    for (std::size_t i = 0; i < sim.data.size(); ++i) {
      const auto& o = sim.data.observations[i];
      CHECK(int(o.delta_l) + int(o.delta_i) + int(o.delta_r) == 1);
      const double t = sim.event_times[i];
      if (std::isfinite(t) && !o.delta_r) {
        CHECK(o.left < t);
        CHECK(o.right >= t);
      }
    }
  }
}

TEST_CASE("generation is bit-reproducible for a fixed seed") {
  const ScenarioSpec spec = ScenarioSpec::with_defaults(2, 2.0, 200, 99);
  const SimDataset a = icmc::gen_dataset(spec);
  const SimDataset b = icmc::gen_dataset(spec);
  REQUIRE(a.data.size() == b.data.size());
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    CHECK(a.data.observations[i].left == b.data.observations[i].left);
    CHECK(a.data.observations[i].right == b.data.observations[i].right);
    CHECK(a.data.observations[i].x == b.data.observations[i].x);
    CHECK(a.data.observations[i].z == b.data.observations[i].z);
  }
  CHECK(a.event_times == b.event_times);
}

TEST_CASE("empirical cure rate tracks the scenario target") {
  // Monte-Carlo targets for 1 - E[g(gamma.X)] per scenario
  const double targets[3] = {0.3766, 0.3262, 0.3370};
  for (int scenario : {1, 2, 3}) {
    const int n = 20000;
    const SimDataset sim =
        icmc::gen_dataset(ScenarioSpec::with_defaults(scenario, 0.0, n, 555));
    const double target = targets[scenario - 1];
    const double se = std::sqrt(target * (1.0 - target) / n);
    CHECK(std::abs(sim.cure_fraction - target) <= 3.0 * se);
  }
}

TEST_CASE("default tunings hit the censoring bands in one smoke cell") {
  const SimDataset sim = icmc::gen_dataset(ScenarioSpec::with_defaults(3, 2.0, 10000, 4242));
  CHECK(sim.censor_rates[0] >= 0.10);
  CHECK(sim.censor_rates[0] <= 0.15);
  CHECK(sim.censor_rates[2] >= 0.39);
  CHECK(sim.censor_rates[2] <= 0.46);
  CHECK(sim.censor_rates[0] + sim.censor_rates[1] + sim.censor_rates[2] ==
        doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("ase grid spans the printed ranges") {
  const icmc::AseGrid grid = icmc::make_ase_grid(3);
  CHECK(grid.x.rows() == 1922);  // 31 x 31 x 2 points at 0.1 spacing
  CHECK(grid.x.col(0).minCoeff() == doctest::Approx(-1.0));
  CHECK(grid.x.col(0).maxCoeff() == doctest::Approx(2.0));
  CHECK(grid.x.col(1).minCoeff() == doctest::Approx(-1.5));
  CHECK(grid.x.col(1).maxCoeff() == doctest::Approx(1.5));
  CHECK(grid.x.col(2).minCoeff() == 0.0);
  CHECK(grid.x.col(2).maxCoeff() == 1.0);
  CHECK(grid.true_p.minCoeff() > 0.0);
  CHECK(grid.true_p.maxCoeff() < 1.0);
}

TEST_CASE("a perfect incidence estimate has zero average squared error") {
  const icmc::AseGrid grid = icmc::make_ase_grid(1);
  icmc::IncidenceState st;
  st.engine = icmc::EngineKind::logistic;
  st.gamma0 = 0.0;
  st.gamma = icmc::true_gamma();
  const double ase = icmc::average_squared_error(st, grid);
  CHECK(ase < 1e-10);  // clamping at 1e-6 keeps it from being exactly 0
}

TEST_CASE("run_replicates fills the metric fields") {
  ScenarioSpec spec = ScenarioSpec::with_defaults(1, 0.0, 120, 2100);
  icmc::FitConfig cfg;
  cfg.engine = icmc::EngineKind::logistic;
  cfg.r = 0.0;
  const icmc::SimMetrics metrics = icmc::run_replicates(spec, 4, cfg, 0, 2);
  CHECK(metrics.n_reps == 4);
  CHECK(metrics.n_failed == 0);
  CHECK(metrics.ase_per_replicate.size() == 4);
  CHECK(metrics.bias.size() == 3);
  CHECK(std::isnan(metrics.ese[0]));  // no bootstrap requested
  CHECK(metrics.censor_rates[0] + metrics.censor_rates[1] + metrics.censor_rates[2] ==
        doctest::Approx(1.0).epsilon(1e-12));

  // thread-count invariance of the aggregate
  const icmc::SimMetrics again = icmc::run_replicates(spec, 4, cfg, 0, 1);
  CHECK(again.bias == metrics.bias);
  CHECK(again.esd == metrics.esd);
  CHECK(again.ase_per_replicate == metrics.ase_per_replicate);
}

}  // TEST_SUITE
