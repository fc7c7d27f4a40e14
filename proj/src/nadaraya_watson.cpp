#include "coarsereg/nadaraya_watson.hpp"

#include "coarsereg/errors.hpp"
#include "coarsereg/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace coarse {

namespace {

void check_bandwidth(double h)
{
  if (!(h > 0.0) || !std::isfinite(h))
    throw Error(ErrorCode::InvalidInput, "bandwidth must be positive and finite");
}

double sample_sd(std::span<const double> v)
{
  CompensatedSum s;
  for (double x : v)
    s += x;
  const double m = s.value() / static_cast<double>(v.size());
  CompensatedSum ss;
  for (double x : v)
    ss += (x - m) * (x - m);
  return std::sqrt(ss.value() / static_cast<double>(v.size() - 1));
}

// Unnormalised Gaussian kernel; the ratio only needs relative weights.
double kernel(double z)
{
  return std::exp(-0.5 * z * z);
}

// The ratio is undefined only when every weight underflows.
bool degenerate(double kernel_sum)
{
  return kernel_sum < std::numeric_limits<double>::min();
}

} // namespace

double nw_estimate(const TrainingSample& sample, double bandwidth, double x)
{
  check_bandwidth(bandwidth);
  const auto xs = sample.w();
  const auto ys = sample.y();
  CompensatedSum num, den;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double k = kernel((x - xs[i]) / bandwidth);
    den += k;
    num += ys[i] * k;
  }
  if (degenerate(den.value()))
    throw Error(ErrorCode::DegenerateDenominator,
                "kernel weights underflow at x=" + std::to_string(x));
  return num.value() / den.value();
}

RegressionCurve nw_curve(const TrainingSample& sample, double bandwidth, const EvalGrid& grid)
{
  check_bandwidth(bandwidth);
  const std::size_t g = grid.size();
  RegressionCurve curve{grid, std::vector<double>(g, std::numeric_limits<double>::quiet_NaN()),
                        std::vector<bool>(g, false)};
  for (std::size_t j = 0; j < g; ++j) {
    try {
      curve.values[j] = nw_estimate(sample, bandwidth, grid[j]);
      curve.defined[j] = true;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateDenominator)
        throw;
    }
  }
  curve.label = "m_nw";
  curve.parameters["bandwidth"] = bandwidth;
  curve.parameters["n"] = static_cast<double>(sample.size());
  if (curve.defined_count() == 0)
    throw Error(ErrorCode::AllDegenerate, "Nadaraya-Watson denominator degenerate at every grid point");
  return curve;
}

std::vector<double> cv_candidates(const TrainingSample& sample, const CvGridSpec& spec)
{
  if (spec.count < 8)
    throw Error(ErrorCode::InvalidInput, "cross-validation grid needs at least 8 points");
  if (!(spec.min_factor > 0.0) || !(spec.max_factor > spec.min_factor))
    throw Error(ErrorCode::InvalidInput, "cross-validation grid needs 0 < min_factor < max_factor");
  if (sample.size() < 3)
    throw Error(ErrorCode::InvalidInput, "cross-validation needs n >= 3");
  const double base = sample_sd(sample.w()) *
                      std::pow(static_cast<double>(sample.size()), -0.2);
  if (!(base > 0.0))
    throw Error(ErrorCode::DegenerateDesign, "cross-validation: predictor values are all equal");
  std::vector<double> out(spec.count);
  const double ratio = std::log(spec.max_factor / spec.min_factor);
  for (std::size_t k = 0; k < spec.count; ++k) {
    const double f = static_cast<double>(k) / static_cast<double>(spec.count - 1);
    out[k] = base * spec.min_factor * std::exp(ratio * f);
  }
  return out;
}

double cv_score(const TrainingSample& sample, double bandwidth)
{
  check_bandwidth(bandwidth);
  const auto xs = sample.w();
  const auto ys = sample.y();
  const std::size_t n = xs.size();
  if (n < 3)
    throw Error(ErrorCode::InvalidInput, "cross-validation needs n >= 3");
  CompensatedSum score;
  for (std::size_t i = 0; i < n; ++i) {
    CompensatedSum num, den;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i)
        continue;
      const double k = kernel((xs[i] - xs[j]) / bandwidth);
      den += k;
      num += ys[j] * k;
    }
    if (degenerate(den.value()))
      return std::numeric_limits<double>::infinity();
    const double r = ys[i] - num.value() / den.value();
    score += r * r;
  }
  return score.value();
}

CvResult cv_bandwidth(const TrainingSample& sample, std::span<const double> candidates)
{
  if (candidates.empty())
    throw Error(ErrorCode::InvalidInput, "cross-validation: no candidate bandwidths");
  CvResult out;
  out.candidates.assign(candidates.begin(), candidates.end());
  std::sort(out.candidates.begin(), out.candidates.end());
  out.scores.reserve(out.candidates.size());
  double best = std::numeric_limits<double>::infinity();
  for (double h : out.candidates) {
    const double s = cv_score(sample, h);
    out.scores.push_back(s);
    if (s < best) {
      best = s;
      out.bandwidth = h;
    }
  }
  if (!std::isfinite(best))
    throw Error(ErrorCode::AllDegenerate, "cross-validation score degenerate at every bandwidth");
  return out;
}

CvResult cv_bandwidth(const TrainingSample& sample, const NwConfig& config)
{
  if (config.bandwidth) {
    check_bandwidth(*config.bandwidth);
    return {*config.bandwidth, {*config.bandwidth}, {}};
  }
  const auto candidates = cv_candidates(sample, config.cv_grid);
  return cv_bandwidth(sample, candidates);
}

} // namespace coarse
