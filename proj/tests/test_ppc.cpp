#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "pstrat/config.hpp"
#include "pstrat/generator.hpp"
#include "pstrat/ppc.hpp"
#include "support/helpers.hpp"

using namespace pstrat;

namespace {
Theta independent_truth() {
  Theta th = default_truth();
  th.kappa = 0.0;
  return th;
}

Dataset small_dataset(std::uint64_t seed, int n) {
  GeneratorConfig gc;
  gc.n = n;
  gc.seed = seed;
  gc.theta_true = independent_truth();
  return generate(gc).first;
}

Draws draws_at(const Theta& th, long reps) {
  Draws d;
  d.kappa = th.kappa;
  d.chains.emplace_back();
  d.chains.back().thetas.assign(static_cast<std::size_t>(reps), th);
  return d;
}

PatientRecord record(int id, int z, double c, double s_tilde, int s_event,
                     double y_tilde, int y_event) {
  PatientRecord r;
  r.id = id;
  r.z = z;
  r.c = c;
  r.s_tilde = s_tilde;
  r.s_event = s_event;
  r.y_tilde = y_tilde;
  r.y_event = y_event;
  return r;
}
}  // namespace

TEST_CASE("replicates hold design columns fixed and carry their true latents") {
  const Theta th = independent_truth();
  const Dataset obs = small_dataset(11, 200);
  Rng rng(5);
  const auto [rep, aug] = replicate_data(th, obs, rng);
  REQUIRE(rep.records.size() == obs.records.size());
  REQUIRE(aug.size() == obs.records.size());
  CHECK(rep.c_max == obs.c_max);
  CHECK_NOTHROW(validate_dataset(rep));
  bool any_outcome_differs = false;
  for (std::size_t i = 0; i < rep.records.size(); ++i) {
    const auto& o = obs.records[i];
    const auto& r = rep.records[i];
    CHECK(r.id == o.id);
    CHECK(r.z == o.z);
    CHECK(r.c == o.c);
    if (r.y_tilde != o.y_tilde) any_outcome_differs = true;
    // latent switcher status must be consistent with what the record shows
    if (r.z == 0 && r.s_event == 1) {
      CHECK(aug[i].s_star.is_switcher());
      CHECK(aug[i].s_star.time == r.s_tilde);
    }
    // with an observed event the latent ordering pins the switch before it;
    // censored units may carry a switch past the censoring time
    if (aug[i].s_star.is_switcher() && r.z == 0 && r.y_event == 1)
      CHECK(aug[i].s_star.time < r.y_tilde + 1e-12);
  }
  CHECK(any_outcome_differs);
}

TEST_CASE("replicate streams are reproducible") {
  const Theta th = independent_truth();
  const Dataset obs = small_dataset(11, 80);
  Rng a(9), b(9), c(10);
  const auto ra = replicate_data(th, obs, a);
  const auto rb = replicate_data(th, obs, b);
  const auto rc = replicate_data(th, obs, c);
  CHECK(serialize_dataset(ra.first) == serialize_dataset(rb.first));
  CHECK(serialize_dataset(ra.first) != serialize_dataset(rc.first));
}

TEST_CASE("information criterion is the complete log likelihood plus a size penalty") {
  const Theta th = independent_truth();
  const Dataset obs = small_dataset(3, 150);
  Rng rng(2);
  const auto aug = initial_augmentation(obs, th, rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < obs.records.size(); ++i)
    acc += unit_log_complete(obs.records[i], aug[i], th);
  CHECK(complete_log_likelihood(obs, aug, th) == Catch::Approx(acc).epsilon(1e-14));
  CHECK(disc_bic(obs, aug, th) ==
        Catch::Approx(-2.0 * (acc + 12.0 * std::log(150.0))).epsilon(1e-14));
}

TEST_CASE("deviance terms match the martingale-residual forms") {
  // event with unit cumulative hazard sits exactly on the model
  CHECK(detail::deviance_term(1, 1.0) == Catch::Approx(0.0).margin(1e-15));
  CHECK(detail::deviance_term(1, 0.5) == Catch::Approx(-2.0 * (0.5 + std::log(0.5))));
  CHECK(detail::deviance_term(0, 0.5) == Catch::Approx(1.0));
  CHECK(detail::deviance_term(0, 0.0) == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("outcome hazards respect arm, status, and the control-arm shift") {
  Theta th = independent_truth();
  const SwitchStatus ns = SwitchStatus::non_switcher();
  const SwitchStatus sw = SwitchStatus::at(1.0);
  const auto ctrl_ns = record(1, 0, 5, 2.0, 0, 2.0, 1);
  const auto ctrl_sw = record(2, 0, 5, 1.0, 1, 2.0, 1);
  const auto trt = record(3, 1, 5, std::numeric_limits<double>::quiet_NaN(), 0, 2.0, 1);
  CHECK(detail::outcome_cumhaz(ctrl_ns, ns, th) ==
        Catch::Approx(weibull_cumulative_hazard(2.0, th.y0_ns)));
  CHECK(detail::outcome_cumhaz(ctrl_sw, sw, th) ==
        Catch::Approx(weibull_cumulative_hazard(1.0, tilted(th.y0_sw, th.lambda, 1.0))));
  // an outcome at or before the switching time has accumulated nothing
  CHECK(detail::outcome_cumhaz(ctrl_sw, SwitchStatus::at(2.0), th) == 0.0);
  CHECK(detail::outcome_cumhaz(trt, ns, th) ==
        Catch::Approx(weibull_cumulative_hazard(2.0, th.y1_ns)));
  CHECK(detail::outcome_cumhaz(trt, sw, th) ==
        Catch::Approx(weibull_cumulative_hazard(2.0, tilted(th.y1_sw, th.lambda, 1.0))));
}

TEST_CASE("switching-time deviance runs over control-arm latent switchers only") {
  const Theta th = independent_truth();
  Dataset d;
  d.c_max = 10;
  d.records = {record(1, 0, 10, 1.0, 1, 3.0, 1),
               record(2, 0, 10, 4.0, 0, 4.0, 0),
               record(3, 1, 10, std::numeric_limits<double>::quiet_NaN(), 0, 2.5, 1)};
  std::vector<AugmentedUnit> aug(3);
  aug[0].s_star = SwitchStatus::at(1.0);
  aug[1].s_star = SwitchStatus::non_switcher();
  aug[2].s_star = SwitchStatus::at(1.5);  // treated switcher: excluded
  const double expect =
      detail::deviance_term(1, weibull_cumulative_hazard(1.0, th.sw));
  CHECK(disc_deviance_s(d, aug, th) == Catch::Approx(expect).epsilon(1e-14));
  // flipping the first unit's status empties the sum
  aug[0].s_star = SwitchStatus::non_switcher();
  CHECK(disc_deviance_s(d, aug, th) == 0.0);
}

TEST_CASE("outcome deviance sums each unit under its own sub-model") {
  const Theta th = independent_truth();
  Dataset d;
  d.c_max = 10;
  d.records = {record(1, 0, 10, 6.0, 0, 6.0, 0),
               record(2, 1, 10, std::numeric_limits<double>::quiet_NaN(), 0, 2.5, 1)};
  std::vector<AugmentedUnit> aug(2);
  aug[0].s_star = SwitchStatus::non_switcher();
  aug[1].s_star = SwitchStatus::non_switcher();
  const double expect =
      detail::deviance_term(0, weibull_cumulative_hazard(6.0, th.y0_ns)) +
      detail::deviance_term(1, weibull_cumulative_hazard(2.5, th.y1_ns));
  CHECK(disc_deviance_y(d, aug, th) == Catch::Approx(expect).epsilon(1e-14));
}

TEST_CASE("product-limit groups split by latent status with a switching-time curve") {
  Dataset d;
  d.c_max = 10;
  d.records = {record(1, 0, 10, 4.0, 0, 4.0, 0),
               record(2, 0, 10, 1.0, 1, 3.0, 1),
               record(3, 1, 10, std::numeric_limits<double>::quiet_NaN(), 0, 2.0, 1),
               record(4, 1, 10, std::numeric_limits<double>::quiet_NaN(), 0, 5.0, 0)};
  std::vector<AugmentedUnit> aug(4);
  aug[0].s_star = SwitchStatus::non_switcher();
  aug[1].s_star = SwitchStatus::at(1.0);
  aug[2].s_star = SwitchStatus::non_switcher();
  aug[3].s_star = SwitchStatus::at(2.5);
  const auto curves = ppc_km_curves(d, aug);
  // group 0: outcomes of units a and c; event at 2.0 among 2 at risk
  CHECK(km_eval(curves[0], 2.0) == Catch::Approx(0.5));
  CHECK(km_eval(curves[0], 1.9) == 1.0);
  // group 1: outcomes of units b and d; event at 3.0 among 2 at risk
  CHECK(km_eval(curves[1], 3.0) == Catch::Approx(0.5));
  // group 2: only unit b's switching time
  CHECK(km_eval(curves[2], 0.9) == 1.0);
  CHECK(km_eval(curves[2], 1.0) == Catch::Approx(0.0));
}

TEST_CASE("an empty group yields the unit curve") {
  Dataset d;
  d.c_max = 10;
  d.records = {record(1, 1, 10, std::numeric_limits<double>::quiet_NaN(), 0, 2.0, 1)};
  std::vector<AugmentedUnit> aug(1);
  aug[0].s_star = SwitchStatus::non_switcher();
  const auto curves = ppc_km_curves(d, aug);
  CHECK(km_eval(curves[1], 5.0) == 1.0);
  CHECK(km_eval(curves[2], 0.5) == 1.0);
}

TEST_CASE("signal and noise summarize uncensored outcomes per status") {
  Dataset d;
  d.c_max = 100;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  d.records = {record(1, 0, 100, 1.0, 0, 1.0, 1),  record(2, 0, 100, 3.0, 0, 3.0, 1),
               record(3, 1, 100, nan, 0, 4.0, 1),  record(4, 1, 100, nan, 0, 8.0, 1),
               record(5, 0, 100, 9.0, 0, 9.0, 0)};
  std::vector<AugmentedUnit> aug(5);
  for (auto& a : aug) a.s_star = SwitchStatus::non_switcher();
  const auto sn = disc_signal_noise(d, aug);
  REQUIRE(sn[0].defined);
  // control mean 2 (var 2), treated mean 6 (var 8); censored unit e drops out
  CHECK(sn[0].signal == Catch::Approx(4.0));
  CHECK(sn[0].noise == Catch::Approx(std::sqrt(2.0 / 2.0 + 8.0 / 2.0)));
  CHECK(sn[0].ratio == Catch::Approx(4.0 / std::sqrt(5.0)));
  CHECK_FALSE(sn[1].defined);
  CHECK(std::isnan(sn[1].signal));
  CHECK_FALSE(sn[2].defined);
}

TEST_CASE("the switching-time feature uses observed control switches") {
  Dataset d;
  d.c_max = 100;
  d.records = {record(1, 0, 100, 1.0, 1, 2.0, 1), record(2, 0, 100, 3.0, 1, 4.0, 1),
               record(3, 0, 100, 5.0, 0, 5.0, 0)};
  std::vector<AugmentedUnit> aug(3);
  aug[0].s_star = SwitchStatus::at(1.0);
  aug[1].s_star = SwitchStatus::at(3.0);
  aug[2].s_star = SwitchStatus::non_switcher();
  const auto sn = disc_signal_noise(d, aug);
  REQUIRE(sn[2].defined);
  CHECK(sn[2].signal == Catch::Approx(2.0));       // mean of {1, 3}
  CHECK(sn[2].noise == Catch::Approx(1.0));        // sqrt(var 2 / n 2)
  CHECK(sn[2].ratio == Catch::Approx(2.0));
}

TEST_CASE("posterior predictive p-values count replicate exceedances") {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  long n_used = 0;
  CHECK(pppv({1.0, 2.0, 3.0}, {2.0, 2.0, 2.0}, &n_used) == Catch::Approx(2.0 / 3.0));
  CHECK(n_used == 3);
  CHECK(pppv({1.0, nan, 3.0}, {0.0, 5.0, 3.0}, &n_used) == Catch::Approx(0.5));
  CHECK(n_used == 2);
  CHECK(std::isnan(pppv({nan}, {1.0}, &n_used)));
  CHECK(n_used == 0);
  CHECK_THROWS_AS(pppv({1.0}, {1.0, 2.0}), std::invalid_argument);
  CHECK_THROWS_AS(pppv({}, {}), std::invalid_argument);
}

TEST_CASE("the check grid spans the requested window") {
  PpcConfig cfg;
  const auto grid = ppc_time_grid(cfg);
  REQUIRE(grid.size() == 300);
  CHECK(grid.front() == Catch::Approx(0.01));
  CHECK(grid.back() == Catch::Approx(3.0));
  PpcConfig coarse;
  coarse.t_max = 0.5;
  coarse.t_step = 0.1;
  const auto g2 = ppc_time_grid(coarse);
  REQUIRE(g2.size() == 5);
  CHECK(g2.front() == Catch::Approx(0.1));
  CHECK(g2.back() == Catch::Approx(0.5));
}

TEST_CASE("the check battery requires the conditionally independent fit") {
  const Dataset obs = small_dataset(7, 50);
  Theta th = default_truth();
  th.kappa = 0.5;
  Draws d = draws_at(th, 3);
  PpcConfig cfg;
  CHECK_THROWS_AS(run_ppc(obs, d, cfg), std::invalid_argument);
  Draws empty;
  empty.kappa = 0.0;
  empty.chains.emplace_back();
  CHECK_THROWS_AS(run_ppc(obs, empty, cfg), std::invalid_argument);
}

TEST_CASE("the battery is reproducible and roughly calibrated at the truth") {
  const Theta th = independent_truth();
  const Dataset obs = small_dataset(41, 400);
  const Draws d = draws_at(th, 60);
  PpcConfig cfg;
  cfg.refresh_sweeps = 5;
  cfg.seed = 77;
  const auto report = run_ppc(obs, d, cfg);
  REQUIRE(report.scalars.size() == 12);
  CHECK(report.n_draws == 60);
  const std::vector<std::string> names = {
      "bic",           "deviance_y",    "deviance_s",     "signal_surv_ns",
      "noise_surv_ns", "ratio_surv_ns", "signal_surv_sw", "noise_surv_sw",
      "ratio_surv_sw", "signal_switch", "noise_switch",   "ratio_switch"};
  for (std::size_t i = 0; i < names.size(); ++i) CHECK(report.scalars[i].name == names[i]);
  // the data were generated from the very parameter the checks condition on,
  // so no global discrepancy should be extreme
  for (const auto& s : report.scalars) {
    INFO(s.name);
    REQUIRE(s.n_used == 60);
    CHECK(s.value > 0.01);
    CHECK(s.value < 0.99);
  }
  for (std::size_t g = 0; g < 3; ++g) {
    REQUIRE(report.km_pppv[g].size() == report.km_grid.size());
    for (const double p : report.km_pppv[g]) {
      CHECK(p >= 0.0);
      CHECK(p <= 1.0);
    }
  }
  const auto again = run_ppc(obs, d, cfg);
  CHECK(serialize_ppc_report(again) == serialize_ppc_report(report));
  CHECK(serialize_ppc_km(again) == serialize_ppc_km(report));
  PpcConfig other = cfg;
  other.seed = 78;
  CHECK(serialize_ppc_report(run_ppc(obs, d, other)) != serialize_ppc_report(report));
}

TEST_CASE("reports serialize with one row per discrepancy and grid point") {
  const Theta th = independent_truth();
  const Dataset obs = small_dataset(13, 120);
  const Draws d = draws_at(th, 8);
  PpcConfig cfg;
  cfg.refresh_sweeps = 2;
  cfg.t_max = 0.3;
  cfg.t_step = 0.1;
  const auto report = run_ppc(obs, d, cfg);
  const std::string rep = serialize_ppc_report(report);
  CHECK(rep.rfind("discrepancy,pppv,n_draws\n", 0) == 0);
  CHECK(std::count(rep.begin(), rep.end(), '\n') == 13);
  const std::string km = serialize_ppc_km(report);
  CHECK(km.rfind("t,group,pppv\n", 0) == 0);
  CHECK(std::count(km.begin(), km.end(), '\n') == 10);
  CHECK(km.find("survival_ns") != std::string::npos);
  CHECK(km.find("survival_sw") != std::string::npos);
  CHECK(km.find(",switch,") != std::string::npos);
}
