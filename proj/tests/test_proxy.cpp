#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "coarsereg/errors.hpp"
#include "coarsereg/known_error.hpp"
#include "coarsereg/proxy.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

using namespace coarse;

namespace {

ErrorCode code_of(auto&& fn)
{
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::Io;
}

struct Pairs {
  std::vector<double> t, x;
};

Pairs synthetic_pairs(std::size_t r, double sigma, std::uint64_t seed)
{
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> e(0.0, sigma);
  Pairs p;
  for (std::size_t i = 0; i < r; ++i) {
    p.t.push_back(u(rng));
    p.x.push_back(1.0 + 2.0 * p.t.back() + e(rng));
  }
  return p;
}

} // namespace

TEST_CASE("least-squares examples")
{
  const std::vector<double> t{0.0, 1.0, 2.0, 3.5};
  std::vector<double> x;
  for (double v : t)
    x.push_back(2.0 * v + 1.0);
  const auto exact = fit_linear_proxy(t, x);
  CHECK(exact.intercept == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(exact.slope == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(exact.sigma_delta_sq == doctest::Approx(0.0).scale(1.0).epsilon(1e-20));
  CHECK(exact.r == 4);

  // S_xy = 3, S_xx = 2: slope 1.5, intercept 8/3 - 1.5 = 7/6.
  const auto hand = fit_linear_proxy(std::vector<double>{0, 1, 2}, std::vector<double>{1, 3, 4});
  CHECK(hand.slope == doctest::Approx(1.5).epsilon(1e-14));
  CHECK(hand.intercept == doctest::Approx(7.0 / 6.0).epsilon(1e-14));
  // residuals -1/6, 1/3, -1/6 with divisor r - 2 = 1
  CHECK(hand.sigma_delta_sq == doctest::Approx(1.0 / 36 + 1.0 / 9 + 1.0 / 36).epsilon(1e-12));

  CHECK(code_of([] { fit_linear_proxy(std::vector<double>{2, 2, 2}, std::vector<double>{1, 2, 3}); }) ==
        ErrorCode::DegenerateDesign);
  CHECK(code_of([] { fit_linear_proxy(std::vector<double>{1}, std::vector<double>{1}); }) == ErrorCode::TooFewPairs);
}

TEST_CASE("residuals satisfy the normal equations")
{
  const auto p = synthetic_pairs(500, 0.3, 2);
  const auto fit = fit_linear_proxy(p.t, p.x);
  double sr = 0.0, str = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < p.t.size(); ++i) {
    const double e = p.x[i] - fit.intercept - fit.slope * p.t[i];
    sr += e;
    str += p.t[i] * e;
    scale += std::abs(p.x[i]) * (1 + std::abs(p.t[i]));
  }
  CHECK(std::abs(sr) <= 1e-9 * scale);
  CHECK(std::abs(str) <= 1e-9 * scale);
}

TEST_CASE("imputation")
{
  const LinearProxyFit identity{0.0, 1.0, 2, 0.0};
  const std::vector<double> t{-1.5, 0.0, 2.25};
  CHECK(impute_w(identity, t) == t);
  const LinearProxyFit lin{1.0, 2.0, 2, 0.0};
  CHECK(impute_w(lin, std::vector<double>{0.0, 1.0}) == std::vector<double>{1.0, 3.0});

  const std::vector<double> tt{0.0, 0.5, 1.0, 4.0};
  const std::vector<double> xx{1.0, 2.0, 3.0, 9.0};
  const auto fit = fit_linear_proxy(tt, xx);
  const auto w = impute_w(fit, tt);
  for (std::size_t i = 0; i < w.size(); ++i)
    CHECK(w[i] == doctest::Approx(xx[i]).epsilon(1e-14));
}

TEST_CASE("external error variance")
{
  const LinearProxyFit lin{1.0, 2.0, 10, 0.0};
  CHECK(estimate_error_variance(lin, std::vector<double>{0.0, 1.0, 2.0}, std::vector<double>{1.0, 3.0, 5.0}) == 0.0);
  // residuals -1 and 1 around the line, divisor 1
  CHECK(estimate_error_variance(lin, std::vector<double>{0.0, 1.0}, std::vector<double>{0.0, 4.0}) ==
        doctest::Approx(2.0).epsilon(1e-15));
  CHECK(code_of([&] { estimate_error_variance(lin, std::vector<double>{0.0}, std::vector<double>{1.0}); }) ==
        ErrorCode::TooFewPairs);
}

TEST_CASE("slope is consistent at r = 10^4")
{
  const double sigma = 0.2, r = 1e4;
  const double bound = 5 * sigma / std::sqrt(r / 12.0);
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto p = synthetic_pairs(10000, sigma, 1000 + seed);
    if (std::abs(fit_linear_proxy(p.t, p.x).slope - 2.0) < bound)
      ++hits;
  }
  CHECK(hits >= 99);
}

TEST_CASE("proxy estimator approaches the true-W estimator as r grows")
{
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> e(0.0, 0.1);
  std::vector<double> t(200), w(200), y(200);
  for (std::size_t i = 0; i < t.size(); ++i) {
    t[i] = u(rng);
    w[i] = 1.0 + 2.0 * t[i];
    y[i] = std::sin(2.0 * w[i]) + e(rng);
  }
  const auto d = ErrorDensity::gaussian(0.2);
  const auto grid = EvalGrid::uniform(1.2, 2.8, 41);
  const auto truth = estimate_m(TrainingSample(w, y), d, grid);

  std::vector<double> gaps;
  for (std::size_t r : {100u, 1000u, 10000u}) {
    const auto p = synthetic_pairs(r, 0.2, 5);
    const auto fit = fit_linear_proxy(p.t, p.x);
    const auto est = estimate_m_proxy(fit, t, y, d, grid);
    double gap = 0.0;
    for (std::size_t j = 0; j < grid.size(); ++j)
      gap = std::max(gap, std::abs(est.values[j] - truth.values[j]));
    gaps.push_back(gap);
    CHECK(est.label == "m_hat_proxy");
    CHECK_FALSE(est.warnings.empty());
  }
  CHECK(gaps[1] < gaps[0]);
  CHECK(gaps[2] < gaps[1]);
}

TEST_CASE("one-shot trimming")
{
  // Line x = t with two planted outliers and extreme t values.
  std::vector<double> t, x;
  for (int i = 0; i < 20; ++i) {
    t.push_back(i);
    x.push_back(i + (i % 2 ? 0.01 : -0.01));
  }
  x[5] += 10.0;
  x[12] -= 8.0;

  TrimSpec spec;
  spec.t_low = 1;  // drops t = 0
  spec.t_high = 2; // drops t = 19, 18
  spec.farthest = 2;
  const auto res = trim_and_fit(t, x, spec);
  CHECK(res.kept.size() == 15);
  CHECK_FALSE(std::binary_search(res.kept.begin(), res.kept.end(), 0u));
  CHECK_FALSE(std::binary_search(res.kept.begin(), res.kept.end(), 5u));
  CHECK_FALSE(std::binary_search(res.kept.begin(), res.kept.end(), 12u));
  CHECK_FALSE(std::binary_search(res.kept.begin(), res.kept.end(), 19u));
  CHECK(res.fit.slope == doctest::Approx(1.0).epsilon(1e-2));

  TrimSpec overlap;
  overlap.t_high = 1;
  overlap.x_high = 1; // same point: counted once
  CHECK(trim_and_fit(t, x, overlap).kept.size() == 19);

  TrimSpec too_many;
  too_many.t_low = 15;
  too_many.t_high = 6;
  CHECK(code_of([&] { trim_and_fit(t, x, too_many); }) == ErrorCode::InvalidInput);
}
