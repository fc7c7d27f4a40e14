#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "coarsereg/errors.hpp"
#include "coarsereg/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

using namespace coarse;

namespace {

ScenarioConfig m1(double ns_delta, double ns_eps, DeltaKind kind)
{
  ScenarioConfig s;
  s.model = Model::M1;
  s.ns_delta = ns_delta;
  s.ns_eps = ns_eps;
  s.delta_kind = kind;
  return s;
}

double g_m1(double w)
{
  return 3 * w + 20 / std::sqrt(2 * std::numbers::pi) * std::exp(-200 * (w - 0.5) * (w - 0.5));
}

// Equality that treats two NaNs (undefined points) as equal.
bool same(const std::vector<double>& a, const std::vector<double>& b)
{
  if (a.size() != b.size())
    return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!(a[i] == b[i] || (std::isnan(a[i]) && std::isnan(b[i]))))
      return false;
  return true;
}

} // namespace

TEST_CASE("noise calibration")
{
  const auto cal = calibrate_noise(m1(0.25, 0.1, DeltaKind::Uniform));
  CHECK(cal.sigma_delta_sq == doctest::Approx(0.25 / 12).epsilon(1e-15));
  CHECK(cal.uniform_half_width == doctest::Approx(std::sqrt(3 * 0.25 / 12)).epsilon(1e-15));
  CHECK(calibrate_noise(m1(0.0, 0.1, DeltaKind::Gaussian)).sigma_delta_sq == 0.0);

  // Independent sup oracle: 10^6-point scan, then a finer local scan.
  double best_w = 0.0, best = -1.0;
  for (int k = 0; k <= 1000000; ++k) {
    const double w = k / 1e6;
    if (g_m1(w) > best) {
      best = g_m1(w);
      best_w = w;
    }
  }
  for (int k = -1000; k <= 1000; ++k)
    best = std::max(best, g_m1(best_w + k * 1e-9));
  // Stationary point where 3 = 400 (w - 1/2) * bump(w): w - 1/2 ~ 3/3192.
  CHECK(best == doctest::Approx(9.48026).epsilon(1e-5));
  CHECK(std::abs(best_w - 0.50094) < 2e-5);
  CHECK(regression_sup(m1(0.25, 0.1, DeltaKind::Gaussian)) == doctest::Approx(best).epsilon(1e-12));
  CHECK(*cal.sigma_eps_sq == doctest::Approx(0.1 * best).epsilon(1e-12));

  ScenarioConfig logistic;
  logistic.model = Model::M2Logistic;
  CHECK_FALSE(calibrate_noise(logistic).sigma_eps_sq);
  logistic.ns_eps = 0.1;
  CHECK_THROWS_AS(validate(logistic), Error);
  CHECK_THROWS_AS(validate(m1(-0.1, 0.1, DeltaKind::Gaussian)), Error);
  auto tiny = m1(0.1, 0.1, DeltaKind::Gaussian);
  tiny.n = 1;
  CHECK_THROWS_AS(validate(tiny), Error);
}

TEST_CASE("generation is deterministic and follows the scenario laws")
{
  auto s = m1(0.25, 0.1, DeltaKind::Gaussian);
  s.seed = 99;
  s.n = 500;
  const auto a = generate(s);
  const auto b = generate(s);
  CHECK(a.w == b.w);
  CHECK(a.x == b.x);
  CHECK(a.y == b.y);
  s.seed = 100;
  CHECK(generate(s).w != a.w);

  ScenarioConfig logistic;
  logistic.model = Model::M2Logistic;
  logistic.n = 400;
  const auto l = generate(logistic);
  for (std::size_t i = 0; i < l.y.size(); ++i) {
    CHECK((l.y[i] == 0.0 || l.y[i] == 1.0));
    CHECK(l.w[i] >= -0.5);
    CHECK(l.w[i] <= 0.5);
  }

  const auto exact = generate(m1(0.25, 0.0, DeltaKind::Uniform));
  for (std::size_t i = 0; i < exact.y.size(); ++i)
    CHECK(exact.y[i] == g_m1(exact.w[i]));
}

TEST_CASE("contamination moments")
{
  for (auto kind : {DeltaKind::Gaussian, DeltaKind::Uniform}) {
    auto s = m1(0.5, 0.1, kind);
    s.n = 40000;
    s.seed = 3;
    const auto d = generate(s);
    double mean = 0.0, sq = 0.0, maxabs = 0.0;
    for (std::size_t i = 0; i < d.x.size(); ++i) {
      const double e = d.x[i] - d.w[i];
      mean += e;
      sq += e * e;
      maxabs = std::max(maxabs, std::abs(e));
    }
    mean /= static_cast<double>(s.n);
    const double var = sq / static_cast<double>(s.n) - mean * mean;
    const double target = 0.5 / 12;
    CHECK(std::abs(mean) < 5 * std::sqrt(target / s.n));
    CHECK(std::abs(var - target) < 0.03 * target);
    if (kind == DeltaKind::Uniform)
      CHECK(maxabs <= calibrate_noise(s).uniform_half_width);
  }
}

TEST_CASE("oracle examples")
{
  ScenarioConfig flat;
  flat.model = Model::Constant;
  flat.constant_level = 2.5;
  flat.ns_eps = 0.0;
  flat.ns_delta = 0.2;
  for (double x : {-0.3, 0.0, 0.4, 1.2})
    CHECK(std::abs(oracle_m(flat, x) - 2.5) <= 1e-9);

  const auto none = m1(0.0, 0.1, DeltaKind::Gaussian);
  for (double x : {0.0, 0.3, 0.5, 0.51, 1.0})
    CHECK(oracle_m(none, x) == g_m1(x));
  CHECK_THROWS_AS(oracle_m(none, 1.5), Error);

  ScenarioConfig logistic;
  logistic.model = Model::M2Logistic;
  logistic.ns_delta = 0.25;
  CHECK(oracle_m(logistic, 0.0) == doctest::Approx(0.5).epsilon(1e-10));
  // symmetric about (0, 1/2)
  CHECK(oracle_m(logistic, 0.2) + oracle_m(logistic, -0.2) == doctest::Approx(1.0).epsilon(1e-9));

  CHECK_THROWS_AS(oracle_m(m1(0.25, 0.1, DeltaKind::Uniform), 3.0), Error);
  CHECK_THROWS_AS(oracle_m(m1(0.25, 0.1, DeltaKind::Gaussian), 50.0), Error);
}

TEST_CASE("oracle agrees with an independent midpoint rule")
{
  const auto s = m1(0.25, 0.1, DeltaKind::Uniform);
  const double a = calibrate_noise(s).uniform_half_width;
  for (int k = 0; k <= 10; ++k) {
    const double x = -0.1 + 1.2 * k / 10.0;
    const double lo = std::max(0.0, x - a), hi = std::min(1.0, x + a);
    const int panels = 400000;
    const double h = (hi - lo) / panels;
    double num = 0.0;
    for (int i = 0; i < panels; ++i)
      num += g_m1(lo + (i + 0.5) * h);
    num *= h;
    CHECK(std::abs(oracle_m(s, x) - num / (hi - lo)) <= 1e-6);
  }
}

TEST_CASE("integrated squared error")
{
  const auto grid = EvalGrid::uniform(0.0, 1.0, 11);
  RegressionCurve c(grid, std::vector<double>(11, 3.0), std::vector<bool>(11, true));
  CHECK(ise(c, std::vector<double>(11, 3.0)).value == 0.0);
  CHECK(ise(c, std::vector<double>(11, 1.5)).value == doctest::Approx(2.25).epsilon(1e-14));

  // Undefined endpoints drop their subintervals.
  c.defined[0] = false;
  c.values[0] = std::nan("");
  const auto skipped = ise(c, std::vector<double>(11, 1.5));
  CHECK(skipped.excluded_intervals == 1);
  CHECK(skipped.value == doctest::Approx(2.25 * 0.9).epsilon(1e-14));

  // Refining the grid moves the trapezoid value toward the exact integral
  // of (x^2 - 0)^2 over [0, 1] = 1/5.
  double prev_err = 1.0;
  for (std::size_t count : {11u, 21u, 41u, 81u}) {
    const auto g = EvalGrid::uniform(0.0, 1.0, count);
    std::vector<double> v(count);
    for (std::size_t j = 0; j < count; ++j)
      v[j] = g[j] * g[j];
    const RegressionCurve sq(g, v, std::vector<bool>(count, true));
    const double err = std::abs(ise(sq, std::vector<double>(count, 0.0)).value - 0.2);
    CHECK(err < prev_err);
    prev_err = err;
  }
}

TEST_CASE("default ISE grid")
{
  const auto g = default_ise_grid(m1(0.25, 0.1, DeltaKind::Uniform));
  CHECK(g.size() == 201);
  CHECK(g.lo() == doctest::Approx(-0.25).epsilon(1e-12));
  CHECK(g.hi() == doctest::Approx(1.25).epsilon(1e-12));
  const auto gg = default_ise_grid(m1(0.25, 0.1, DeltaKind::Gaussian));
  CHECK(gg.lo() == doctest::Approx(-2 * std::sqrt(0.25 / 12)).epsilon(1e-12));
}

TEST_CASE("replication study contracts")
{
  const auto scn = m1(0.25, 0.1, DeltaKind::Uniform);
  const auto grid = default_ise_grid(scn, 101);
  EstimatorSpec spec;
  spec.points = {0.5};

  const auto one = run_replications(scn, spec, 1, grid, 5);
  REQUIRE(one.deciles.size() == 3);
  CHECK(same(one.deciles[0].values, one.deciles[1].values));
  CHECK(same(one.deciles[1].values, one.deciles[2].values));

  const auto rep = run_replications(scn, spec, 40, grid, 5);
  CHECK(rep.failures == 0);
  CHECK(rep.deciles[0].rank == 4);
  CHECK(rep.deciles[1].rank == 20);
  CHECK(rep.deciles[2].rank == 36);
  CHECK(rep.deciles[0].ise <= rep.deciles[1].ise);
  CHECK(rep.deciles[1].ise <= rep.deciles[2].ise);
  for (double v : rep.ise)
    CHECK(v >= 0.0);
  CHECK(rep.points[0].estimates == 40);
  CHECK(rep.points[0].ci_trials == 40);
  CHECK(rep.points[0].rmse > 0.0);

  std::vector<double> sorted = rep.ise;
  std::sort(sorted.begin(), sorted.end());
  CHECK(rep.median_ise == doctest::Approx(0.5 * (sorted[19] + sorted[20])).epsilon(1e-15));

  const auto parallel = run_replications(scn, spec, 40, grid, 5, 3);
  CHECK(parallel.ise == rep.ise);
  CHECK(same(parallel.deciles[2].values, rep.deciles[2].values));

  CHECK(decile_ranks(1000) == std::vector<std::size_t>{100, 500, 900});
  CHECK(decile_ranks(7) == std::vector<std::size_t>{1, 4, 7});
}

TEST_CASE("noise-free synthetic study has negligible error")
{
  ScenarioConfig flat;
  flat.model = Model::Constant;
  flat.constant_level = -1.75;
  flat.ns_eps = 0.0;
  flat.ns_delta = 0.1;
  flat.n = 50;
  const auto rep = run_replications(flat, EstimatorSpec{}, 10, default_ise_grid(flat, 51), 1);
  CHECK(rep.failures == 0);
  for (double v : rep.ise)
    CHECK(v <= 1e-10);
}

TEST_CASE("estimator failures are tallied, not thrown")
{
  auto scn = m1(0.1, 0.1, DeltaKind::Uniform);
  scn.n = 5;
  const auto rep = run_replications(scn, EstimatorSpec{}, 6, EvalGrid({5.0, 6.0}), 2);
  CHECK(rep.failures == 6);
  CHECK(rep.failure_codes.at("all-degenerate") == 6);
  CHECK(rep.deciles.empty());
}

TEST_CASE("working densities")
{
  const auto scn = m1(0.1, 0.1, DeltaKind::Uniform);
  EstimatorSpec spec;
  CHECK(working_density(spec, scn).kind() == DensityKind::Uniform);
  spec.density = DensityChoice::GaussianMatched;
  const auto g = working_density(spec, scn);
  CHECK(g.kind() == DensityKind::Gaussian);
  CHECK(*g.variance() == doctest::Approx(0.1 / 12).epsilon(1e-14));
  spec.density = DensityChoice::LaplaceMatched;
  CHECK(*working_density(spec, scn).variance() == doctest::Approx(0.1 / 12).epsilon(1e-14));
  CHECK(spec.label() == "known:laplace-matched");
}
