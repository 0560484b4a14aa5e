#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "pstrat/config.hpp"
#include "pstrat/estimands.hpp"
#include "support/helpers.hpp"

using namespace pstrat;

namespace {
const Theta kTruth = default_truth();

Theta linked_truth(double kappa) {
  Theta t = kTruth;
  t.kappa = kappa;
  return t;
}

// piecewise quadrature: adaptive Simpson on one wide interval can terminate
// early when every initial probe lands in the far tail, so seed it with
// breakpoints through the bulk of the mass
double quad_pieces(const std::function<double(double)>& f, const std::vector<double>& brk,
                   double tol) {
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < brk.size(); ++i)
    acc += testutil::integrate(f, brk[i], brk[i + 1], tol);
  return acc;
}
}  // namespace

TEST_CASE("type-7 quantiles interpolate between order statistics") {
  const std::vector<double> v = {1.0, 2.0, 3.0, 4.0};
  CHECK(quantile_sorted(v, 0.5) == Catch::Approx(2.5));
  CHECK(quantile_sorted(v, 0.025) == Catch::Approx(1.075));
  CHECK(quantile_sorted(v, 0.975) == Catch::Approx(3.925));
  CHECK(quantile_sorted(v, 0.0) == 1.0);
  CHECK(quantile_sorted(v, 1.0) == 4.0);
  CHECK(quantile_sorted({7.0}, 0.3) == 7.0);
  CHECK_THROWS_AS(quantile_sorted({}, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(quantile_sorted(v, 1.5), std::invalid_argument);
}

TEST_CASE("summaries drop undefined draws and go NaN only when nothing remains") {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const auto s = summarize({1.0, 2.0, 3.0, 4.0});
  CHECK(s.mean == Catch::Approx(2.5));
  CHECK(s.median == Catch::Approx(2.5));
  const auto mixed = summarize({1.0, nan, 2.0, 3.0, nan, 4.0});
  CHECK(mixed.mean == Catch::Approx(2.5));
  CHECK(mixed.q025 == Catch::Approx(1.075));
  const auto none = summarize({nan, nan});
  CHECK(std::isnan(none.mean));
  CHECK(std::isnan(none.median));
  CHECK_THROWS_AS(summarize({}), std::invalid_argument);
}

TEST_CASE("assignment-level effects match the reference pair") {
  const WeibullParams arm0{1.2, -0.8}, arm1{1.5, -1.3};
  CHECK(itt_ace(arm0, arm1) == Catch::Approx(0.315454484211166125).epsilon(1e-13));
  CHECK(itt_dce(0.0, arm0, arm1) == 0.0);
  CHECK(itt_dce(1.0, arm0, arm0) == 0.0);
  // survival-difference curve integrates back to the mean difference
  const double quad = quad_pieces(
      [&](double y) { return itt_dce(y, arm0, arm1); }, {0.0, 1.0, 2.0, 4.0, 8.0, 20.0, 80.0},
      1e-11);
  CHECK(quad == Catch::Approx(itt_ace(arm0, arm1)).epsilon(1e-6));
}

TEST_CASE("non-switcher average effect matches references across linkage values") {
  CHECK(ace_ns(kTruth) == Catch::Approx(1.868755948885093128).epsilon(1e-13));
  CHECK(ace_ns(linked_truth(0.5)) == Catch::Approx(2.875053284819524209).epsilon(1e-13));
  CHECK(ace_ns(linked_truth(1.0)) == Catch::Approx(3.88135062075395529).epsilon(1e-13));
}

TEST_CASE("switcher average effect matches references on the switching-time profile") {
  CHECK(ace_sw(0.5, kTruth) == Catch::Approx(0.945110608834649295).epsilon(1e-13));
  CHECK(ace_sw(1.0, kTruth) == Catch::Approx(0.446958080555131714).epsilon(1e-13));
  CHECK(ace_sw(2.0, kTruth) == Catch::Approx(-0.556755546546762374).epsilon(1e-13));
  CHECK(mean_y0_sw(kTruth, 1.0) ==
        Catch::Approx(1.0 + weibull_mean(tilted(kTruth.y0_sw, kTruth.lambda, 1.0))));
}

TEST_CASE("distributional effects are closed-form without linkage") {
  CHECK(dce_ns(2.0, kTruth, 10, 1) == Catch::Approx(0.263963600591063580).epsilon(1e-13));
  CHECK(dce_sw(2.0, 1.0, kTruth, 10, 1) ==
        Catch::Approx(0.027254860208883558).epsilon(1e-13));
  // control survival is identically one before the switching time
  CHECK(dce_sw(0.8, 1.0, kTruth, 10, 1) ==
        Catch::Approx(std::exp(weibull_log_survival(0.8, tilted(kTruth.y1_sw, kTruth.lambda, 1.0))) -
                      1.0));
}

TEST_CASE("linked distributional effect agrees with quadrature") {
  const Theta th = linked_truth(0.6);
  const double y = 2.0;
  // treated term: E over y0 of survival(y - kappa y0), with the atom past y/kappa
  const double cut = y / th.kappa;
  const double inner = testutil::integrate(
      [&](double t) {
        return std::exp(weibull_log_pdf(t, th.y0_ns) +
                        weibull_log_survival(y - th.kappa * t, th.y1_ns));
      },
      1e-12, cut, 1e-12);
  const double atom = std::exp(weibull_log_survival(cut, th.y0_ns));
  const double expect = inner + atom - std::exp(weibull_log_survival(y, th.y0_ns));
  const double got = dce_ns(y, th, 400000, 77);
  CHECK(got == Catch::Approx(expect).margin(0.004));
}

TEST_CASE("conditional switcher effect is exactly zero before the switching time") {
  for (const double kappa : {0.0, 0.5, 1.0}) {
    const Theta th = linked_truth(kappa);
    CHECK(cdce_sw(0.5, 1.0, th, 50, 3) == 0.0);
    CHECK(cdce_sw(1.0, 1.0, th, 50, 3) == 0.0);
  }
}

TEST_CASE("conditional switcher effect matches its independent-draw limit") {
  // without linkage the two terms have closed forms: survival of Y(1) given
  // Y(1) >= s against the shifted control survival
  const double y = 2.0, s = 1.0;
  const auto t0 = tilted(kTruth.y0_sw, kTruth.lambda, s);
  const auto t1 = tilted(kTruth.y1_sw, kTruth.lambda, s);
  const double expect =
      std::exp(weibull_log_survival(y, t1)) / std::exp(weibull_log_survival(s, t1)) -
      std::exp(weibull_log_survival(y - s, t0));
  const double got = cdce_sw(y, s, kTruth, 400000, 5);
  CHECK(got == Catch::Approx(expect).margin(0.005));
}

TEST_CASE("conditional effect reports NaN when the conditioning event has no mass") {
  Theta th = kTruth;
  th.y1_sw = {3.0, 20.0};  // treated residuals essentially zero: Y(1) < s always
  const double v = cdce_sw(2.0, 1.0, th, 200, 9);
  CHECK(std::isnan(v));
}

TEST_CASE("curve evaluations agree with pointwise ones without linkage") {
  const std::vector<double> grid = {0.5, 1.0, 1.5, 2.0, 3.0};
  const auto ns_curve = dce_ns_curve(grid, kTruth, 10, 1);
  const auto sw_curve = dce_sw_curve(grid, 1.0, kTruth, 10, 1);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    CHECK(ns_curve[i] == dce_ns(grid[i], kTruth, 10, 1));
    CHECK(sw_curve[i] == dce_sw(grid[i], 1.0, kTruth, 10, 1));
  }
}

TEST_CASE("curve evaluations converge to the pointwise values under linkage") {
  const Theta th = linked_truth(0.5);
  const std::vector<double> grid = {1.0, 2.0};
  const auto ns_curve = dce_ns_curve(grid, th, 300000, 21);
  const auto sw_curve = dce_sw_curve(grid, 0.75, th, 300000, 22);
  const auto c_curve = cdce_sw_curve(grid, 0.75, th, 300000, 23);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    CHECK(ns_curve[i] == Catch::Approx(dce_ns(grid[i], th, 300000, 31)).margin(0.006));
    CHECK(sw_curve[i] ==
          Catch::Approx(dce_sw(grid[i], 0.75, th, 300000, 32)).margin(0.006));
    CHECK(c_curve[i] ==
          Catch::Approx(cdce_sw(grid[i], 0.75, th, 300000, 33)).margin(0.008));
  }
  // the zero section stays exact under shared draws
  const auto zeros = cdce_sw_curve({0.25, 0.5, 0.75}, 0.75, th, 200, 3);
  CHECK(zeros == std::vector<double>{0.0, 0.0, 0.0});
}

TEST_CASE("restricted switching-time draws follow the truncated law") {
  const SwitchRegion region{0.5, 1.5};
  Rng rng(47);
  std::vector<double> xs(20000);
  for (auto& x : xs) x = restricted_switch_sample(kTruth.sw, region, rng.uniform());
  const double g_lo = std::exp(weibull_log_survival(0.5, kTruth.sw));
  const double g_hi = std::exp(weibull_log_survival(1.5, kTruth.sw));
  for (const double x : xs) {
    REQUIRE(x > 0.5);
    REQUIRE(x <= 1.5);
  }
  const auto cdf = [&](double t) {
    return (g_lo - std::exp(weibull_log_survival(t, kTruth.sw))) / (g_lo - g_hi);
  };
  CHECK(testutil::ks_statistic(xs, cdf) < testutil::ks_crit_01(xs.size()));
  // zero-mass region
  CHECK_THROWS_AS(restricted_switch_sample(kTruth.sw, SwitchRegion{2.0, 2.0}, 0.5),
                  std::invalid_argument);
}

TEST_CASE("coarse average effect integrates the per-time profile") {
  const double expect = quad_pieces(
      [&](double s) {
        return std::exp(weibull_log_pdf(s, kTruth.sw)) * ace_sw(s, kTruth);
      },
      {1e-10, 0.5, 1.5, 3.0, 6.0, 12.0, 60.0}, 1e-9);
  CHECK(coarse_ace(SwitchRegion{}, kTruth, 400000, 13) ==
        Catch::Approx(expect).margin(0.02));
  // restriction to a region renormalizes within it
  const SwitchRegion narrow{0.9, 1.1};
  const double mass = std::exp(weibull_log_survival(0.9, kTruth.sw)) -
                      std::exp(weibull_log_survival(1.1, kTruth.sw));
  const double expect_narrow =
      testutil::integrate(
          [&](double s) {
            return std::exp(weibull_log_pdf(s, kTruth.sw)) * ace_sw(s, kTruth);
          },
          0.9, 1.1, 1e-10) /
      mass;
  CHECK(coarse_ace(narrow, kTruth, 200000, 15) == Catch::Approx(expect_narrow).margin(0.01));
}

TEST_CASE("coarse distributional effect integrates the conditional curves") {
  const std::vector<double> grid = {1.0, 2.0};
  const auto got = coarse_dce(SwitchRegion{}, kTruth, 400000, grid, 17);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double y = grid[i];
    const double expect = quad_pieces(
        [&](double s) {
          return std::exp(weibull_log_pdf(s, kTruth.sw)) * dce_sw(y, s, kTruth, 10, 1);
        },
        {1e-10, 0.5, 1.5, 3.0, 6.0, 12.0, 60.0}, 1e-9);
    CHECK(got[i] == Catch::Approx(expect).margin(0.005));
  }
}

TEST_CASE("coarse conditional effect self-normalizes over the joint draws") {
  // brute-force comparator with its own stream
  const std::vector<double> grid = {2.0};
  const auto got = coarse_cdce(SwitchRegion{}, kTruth, 400000, grid, 19);
  Rng rng(1234);
  long kept = 0, n1 = 0, n0 = 0;
  for (int j = 0; j < 400000; ++j) {
    const double s = weibull_sample(kTruth.sw, rng.uniform());
    const double y0 = s + weibull_sample(tilted(kTruth.y0_sw, kTruth.lambda, s), rng.uniform());
    const double y1 = weibull_sample(tilted(kTruth.y1_sw, kTruth.lambda, s), rng.uniform());
    if (y1 < s) continue;
    ++kept;
    if (y1 > 2.0) ++n1;
    if (y0 > 2.0) ++n0;
  }
  const double brute = static_cast<double>(n1 - n0) / static_cast<double>(kept);
  CHECK(got[0] == Catch::Approx(brute).margin(0.008));
}

TEST_CASE("default grids cover the contracted evaluation points") {
  const auto y = default_y_grid();
  REQUIRE(y.size() == 80);
  CHECK(y.front() == Catch::Approx(0.05));
  CHECK(y[59] == Catch::Approx(3.0));
  CHECK(y[60] == Catch::Approx(3.25));
  CHECK(y.back() == Catch::Approx(8.0));
  CHECK_NOTHROW(validate_grid(y, "default y"));
  const auto s = default_s_values();
  REQUIRE(s.size() == 11);
  CHECK(s.front() == Catch::Approx(0.25));
  CHECK(s.back() == Catch::Approx(2.75));
}

TEST_CASE("grid validation rejects unordered or nonpositive points") {
  CHECK_THROWS_AS(validate_grid({0.0, 1.0}, "g"), std::invalid_argument);
  CHECK_THROWS_AS(validate_grid({1.0, 1.0}, "g"), std::invalid_argument);
  CHECK_THROWS_AS(validate_grid({2.0, 1.0}, "g"), std::invalid_argument);
  CHECK_NOTHROW(validate_grid({1.0, 2.0}, "g"));
}

TEST_CASE("positivity violations throw") {
  CHECK_THROWS_AS(dce_ns(0.0, kTruth, 10, 1), std::invalid_argument);
  CHECK_THROWS_AS(dce_sw(1.0, 0.0, kTruth, 10, 1), std::invalid_argument);
  CHECK_THROWS_AS(cdce_sw(-1.0, 1.0, kTruth, 10, 1), std::invalid_argument);
}
