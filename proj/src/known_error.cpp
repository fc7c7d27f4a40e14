#include "coarsereg/known_error.hpp"

#include "coarsereg/errors.hpp"
#include "coarsereg/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace coarse {

namespace {

void check_interval(double lo, double hi, const SearchOptions& options)
{
  if (!(hi > lo) || !std::isfinite(lo) || !std::isfinite(hi))
    throw Error(ErrorCode::InvalidInput, "search interval must satisfy lo < hi");
  if (options.scan_points < 2)
    throw Error(ErrorCode::InvalidInput, "scan needs at least 2 points");
}

double scan_node(double lo, double hi, std::size_t k, std::size_t count)
{
  if (k + 1 == count)
    return hi;
  return lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(count - 1);
}

std::vector<double> scan_values(const TrainingSample& sample,
                                const ErrorDensity& density,
                                double lo,
                                double hi,
                                std::size_t count)
{
  std::vector<double> values(count);
  for (std::size_t k = 0; k < count; ++k) {
    const double x = scan_node(lo, hi, k, count);
    const auto m = estimate_m_at(sample, density, x);
    if (!m)
      throw Error(ErrorCode::DegenerateDenominator,
                  "psi_hat below threshold at x=" + std::to_string(x) + " inside the search interval");
    values[k] = *m;
  }
  return values;
}

} // namespace

RatioParts estimate_ratio_parts(const TrainingSample& sample, const ErrorDensity& density, double x)
{
  const auto w = sample.w();
  const auto y = sample.y();
  CompensatedSum phi;
  CompensatedSum psi;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double k = density.density(x - w[i]);
    psi += k;
    phi += y[i] * k;
  }
  const double n = static_cast<double>(w.size());
  return {phi.value() / n, psi.value() / n};
}

double estimate_psi(const TrainingSample& sample, const ErrorDensity& density, double x)
{
  return estimate_ratio_parts(sample, density, x).psi;
}

double estimate_phi(const TrainingSample& sample, const ErrorDensity& density, double x)
{
  return estimate_ratio_parts(sample, density, x).phi;
}

std::optional<double> estimate_m_at(const TrainingSample& sample, const ErrorDensity& density, double x)
{
  const auto parts = estimate_ratio_parts(sample, density, x);
  if (parts.psi < kDegeneracyThreshold)
    return std::nullopt;
  return parts.phi / parts.psi;
}

RegressionCurve estimate_m(const TrainingSample& sample,
                           const ErrorDensity& density,
                           const EvalGrid& grid,
                           unsigned threads)
{
  const std::size_t g = grid.size();
  std::vector<double> values(g, std::numeric_limits<double>::quiet_NaN());
  std::vector<char> ok(g, 0);
  parallel_for(g, threads, [&](std::size_t j) {
    if (auto m = estimate_m_at(sample, density, grid[j])) {
      values[j] = *m;
      ok[j] = 1;
    }
  });

  RegressionCurve curve{grid, std::move(values), std::vector<bool>(ok.begin(), ok.end())};
  curve.label = "m_hat";
  curve.parameters["n"] = static_cast<double>(sample.size());
  if (curve.defined_count() == 0)
    throw Error(ErrorCode::AllDegenerate, "psi_hat below threshold at every grid point");
  if (curve.defined_count() < g)
    curve.warnings.push_back(std::to_string(g - curve.defined_count()) +
                             " grid point(s) undefined: psi_hat below threshold");
  return curve;
}

double estimate_m_derivative(const TrainingSample& sample, const ErrorDensity& density, double x)
{
  const auto w = sample.w();
  const auto y = sample.y();
  CompensatedSum phi, psi, dphi, dpsi;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double u = x - w[i];
    const double k = density.density(u);
    const double dk = density.derivative(u, 1);
    psi += k;
    phi += y[i] * k;
    dpsi += dk;
    dphi += y[i] * dk;
  }
  const double n = static_cast<double>(w.size());
  const double psi_v = psi.value() / n;
  if (psi_v < kDegeneracyThreshold)
    throw Error(ErrorCode::DegenerateDenominator,
                "psi_hat below threshold at x=" + std::to_string(x));
  const double phi_v = phi.value() / n;
  return (dphi.value() / n * psi_v - phi_v * dpsi.value() / n) / (psi_v * psi_v);
}

Extremum find_extremum(const TrainingSample& sample,
                       const ErrorDensity& density,
                       double lo,
                       double hi,
                       ExtremumKind kind,
                       const SearchOptions& options)
{
  check_interval(lo, hi, options);
  const std::size_t count = options.scan_points;
  const auto values = scan_values(sample, density, lo, hi, count);
  const double sign = kind == ExtremumKind::Max ? 1.0 : -1.0;

  std::size_t best = 0;
  for (std::size_t k = 1; k < count; ++k)
    if (sign * values[k] > sign * values[best])
      best = k;

  // Flat scan: refinement cannot improve on the first argmax.
  bool flat = true;
  for (double v : values)
    flat = flat && v == values[best];
  if (flat)
    return {scan_node(lo, hi, best, count), values[best]};

  const double a = scan_node(lo, hi, best == 0 ? 0 : best - 1, count);
  const double b = scan_node(lo, hi, std::min(best + 1, count - 1), count);
  auto objective = [&](double x) {
    const auto m = estimate_m_at(sample, density, x);
    return m ? sign * *m : -std::numeric_limits<double>::infinity();
  };
  const double loc = golden_section_max(objective, a, b, options.location_tolerance);
  const double val = sign * objective(loc);
  if (sign * val < sign * values[best])
    return {scan_node(lo, hi, best, count), values[best]};
  return {loc, val};
}

std::vector<double> find_zeros(const TrainingSample& sample,
                               const ErrorDensity& density,
                               double lo,
                               double hi,
                               double level,
                               const SearchOptions& options)
{
  check_interval(lo, hi, options);
  const std::size_t count = options.scan_points;
  auto values = scan_values(sample, density, lo, hi, count);
  // Differences at roundoff level count as touching, not crossing.
  const double snap = 1e-12 * std::max(1.0, std::abs(level));
  for (double& v : values) {
    v -= level;
    if (std::abs(v) <= snap)
      v = 0.0;
  }

  auto shifted = [&](double x) {
    const auto m = estimate_m_at(sample, density, x);
    if (!m)
      throw Error(ErrorCode::DegenerateDenominator, "psi_hat below threshold during bisection");
    return *m - level;
  };

  std::vector<double> zeros;
  for (std::size_t k = 0; k + 1 < count; ++k) {
    const double a = values[k];
    const double b = values[k + 1];
    if (a * b < 0.0) {
      zeros.push_back(bisect_root(shifted, scan_node(lo, hi, k, count),
                                  scan_node(lo, hi, k + 1, count), options.root_tolerance));
    } else if (a == 0.0 && k > 0 && values[k - 1] * b < 0.0) {
      // Exact hit on a scan node with a strict sign change across it.
      zeros.push_back(scan_node(lo, hi, k, count));
    }
  }
  return zeros;
}

} // namespace coarse
