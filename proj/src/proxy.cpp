#include "coarsereg/proxy.hpp"

#include "coarsereg/errors.hpp"
#include "coarsereg/known_error.hpp"
#include "coarsereg/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace coarse {

namespace {

double mean(std::span<const double> v)
{
  CompensatedSum s;
  for (double x : v)
    s += x;
  return s.value() / static_cast<double>(v.size());
}

void check_finite(std::span<const double> v, const char* what)
{
  for (double x : v)
    if (!std::isfinite(x))
      throw Error(ErrorCode::InvalidInput, std::string(what) + " contains a non-finite value");
}

} // namespace

LinearProxyFit fit_linear_proxy(std::span<const double> t, std::span<const double> x)
{
  if (t.size() != x.size())
    throw Error(ErrorCode::InvalidInput, "proxy fit: t and x lengths differ");
  if (t.size() < 2)
    throw Error(ErrorCode::TooFewPairs, "proxy fit needs at least 2 pairs");
  check_finite(t, "proxy fit t");
  check_finite(x, "proxy fit x");

  const double tm = mean(t);
  const double xm = mean(x);
  CompensatedSum sxx, sxy, tt;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double dt = t[i] - tm;
    sxx += dt * dt;
    sxy += dt * (x[i] - xm);
    tt += t[i] * t[i];
  }
  const double r = static_cast<double>(t.size());
  const double scale = std::max(1.0, tt.value() / r);
  if (sxx.value() / r < 1e-14 * scale)
    throw Error(ErrorCode::DegenerateDesign, "proxy fit: t values are (nearly) constant");

  LinearProxyFit fit;
  fit.slope = sxy.value() / sxx.value();
  fit.intercept = xm - fit.slope * tm;
  fit.r = t.size();
  if (t.size() > 2) {
    CompensatedSum rss;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double e = x[i] - fit.intercept - fit.slope * t[i];
      rss += e * e;
    }
    fit.sigma_delta_sq = rss.value() / (r - 2.0);
  }
  return fit;
}

std::vector<double> impute_w(const LinearProxyFit& fit, std::span<const double> t)
{
  std::vector<double> w(t.size());
  for (std::size_t i = 0; i < t.size(); ++i)
    w[i] = fit.intercept + fit.slope * t[i];
  return w;
}

double estimate_error_variance(const LinearProxyFit& fit,
                               std::span<const double> t,
                               std::span<const double> x)
{
  if (t.size() != x.size())
    throw Error(ErrorCode::InvalidInput, "error variance: t and x lengths differ");
  if (t.size() < 2)
    throw Error(ErrorCode::TooFewPairs, "error variance needs at least 2 pairs");
  const auto w = impute_w(fit, t);
  std::vector<double> resid(t.size());
  for (std::size_t i = 0; i < t.size(); ++i)
    resid[i] = x[i] - w[i];
  const double m = mean(resid);
  CompensatedSum ss;
  for (double e : resid)
    ss += (e - m) * (e - m);
  return ss.value() / static_cast<double>(t.size() - 1);
}

RegressionCurve estimate_m_proxy(const LinearProxyFit& fit,
                                 std::span<const double> t,
                                 std::span<const double> y,
                                 const ErrorDensity& density,
                                 const EvalGrid& grid)
{
  const TrainingSample imputed(impute_w(fit, t), std::vector<double>(y.begin(), y.end()));
  auto curve = estimate_m(imputed, density, grid);
  curve.label = "m_hat_proxy";
  curve.parameters["theta1"] = fit.intercept;
  curve.parameters["theta2"] = fit.slope;
  curve.warnings.push_back("proxy path: variance ignores estimation of theta; intervals are approximate");
  return curve;
}

RegressionCurve estimate_m_fourier_proxy(const LinearProxyFit& fit,
                                         std::span<const double> t,
                                         std::span<const double> y,
                                         const ReplicatedSample& replicates,
                                         const FourierConfig& config,
                                         const EvalGrid& grid)
{
  const TrainingSample imputed(impute_w(fit, t), std::vector<double>(y.begin(), y.end()));
  auto curve = estimate_m_fourier(imputed, replicates, config, grid);
  curve.label = "m_tilde_proxy";
  curve.parameters["theta1"] = fit.intercept;
  curve.parameters["theta2"] = fit.slope;
  return curve;
}

TrimmedFit trim_and_fit(std::span<const double> t, std::span<const double> x, const TrimSpec& spec)
{
  if (t.size() != x.size())
    throw Error(ErrorCode::InvalidInput, "trim: t and x lengths differ");
  const std::size_t n = t.size();

  std::vector<std::size_t> by_t(n), by_x(n);
  std::iota(by_t.begin(), by_t.end(), 0);
  std::iota(by_x.begin(), by_x.end(), 0);
  std::stable_sort(by_t.begin(), by_t.end(), [&](auto a, auto b) { return t[a] < t[b]; });
  std::stable_sort(by_x.begin(), by_x.end(), [&](auto a, auto b) { return x[a] < x[b]; });

  if (spec.t_low + spec.t_high > n || spec.x_low + spec.x_high > n)
    throw Error(ErrorCode::InvalidInput, "trim: more deletions than observations");

  std::set<std::size_t> dropped;
  for (std::size_t k = 0; k < spec.t_low; ++k)
    dropped.insert(by_t[k]);
  for (std::size_t k = 0; k < spec.t_high; ++k)
    dropped.insert(by_t[n - 1 - k]);
  for (std::size_t k = 0; k < spec.x_low; ++k)
    dropped.insert(by_x[k]);
  for (std::size_t k = 0; k < spec.x_high; ++k)
    dropped.insert(by_x[n - 1 - k]);

  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < n; ++i)
    if (!dropped.contains(i))
      kept.push_back(i);

  auto gather = [&](const std::vector<std::size_t>& idx, std::span<const double> v) {
    std::vector<double> out;
    out.reserve(idx.size());
    for (auto i : idx)
      out.push_back(v[i]);
    return out;
  };

  if (spec.farthest > 0) {
    const auto first = fit_linear_proxy(gather(kept, t), gather(kept, x));
    if (spec.farthest >= kept.size())
      throw Error(ErrorCode::InvalidInput, "trim: more deletions than observations");
    std::vector<std::size_t> order(kept.size());
    std::iota(order.begin(), order.end(), 0);
    auto dist = [&](std::size_t k) {
      const auto i = kept[k];
      return std::abs(x[i] - first.intercept - first.slope * t[i]);
    };
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return dist(a) > dist(b); });
    std::set<std::size_t> far(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(spec.farthest));
    std::vector<std::size_t> survivors;
    for (std::size_t k = 0; k < kept.size(); ++k)
      if (!far.contains(k))
        survivors.push_back(kept[k]);
    kept = std::move(survivors);
  }

  return {fit_linear_proxy(gather(kept, t), gather(kept, x)), kept};
}

} // namespace coarse
