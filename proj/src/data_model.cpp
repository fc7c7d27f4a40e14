#include "coarsereg/data_model.hpp"

#include "coarsereg/errors.hpp"
#include "coarsereg/numeric.hpp"

#include <charconv>
#include <cmath>
#include <numbers>

namespace coarse {

namespace {

bool all_finite(std::span<const double> v)
{
  for (double x : v)
    if (!std::isfinite(x))
      return false;
  return true;
}

std::string shortest(double v)
{
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void require_positive_scale(double s, const char* what)
{
  if (!(s > 0.0) || !std::isfinite(s))
    throw Error(ErrorCode::InvalidInput, std::string(what) + " must be positive and finite");
}

} // namespace

TrainingSample::TrainingSample(std::vector<double> w, std::vector<double> y)
  : w_(std::move(w)), y_(std::move(y))
{
  if (w_.size() != y_.size())
    throw Error(ErrorCode::InvalidInput, "training sample: w and y lengths differ");
  if (w_.empty())
    throw Error(ErrorCode::InvalidInput, "training sample: need at least one pair");
  if (!all_finite(w_) || !all_finite(y_))
    throw Error(ErrorCode::InvalidInput, "training sample: non-finite entry");
}

ReplicatedSample::ReplicatedSample(std::vector<std::vector<double>> groups)
  : groups_(std::move(groups))
{
  if (groups_.empty())
    throw Error(ErrorCode::InvalidInput, "replicated sample: no groups");
  for (std::size_t j = 0; j < groups_.size(); ++j) {
    const auto& g = groups_[j];
    if (g.size() < 2)
      throw Error(ErrorCode::InvalidInput,
                  "replicated sample: group " + std::to_string(j) + " has fewer than 2 measurements");
    if (!all_finite(g))
      throw Error(ErrorCode::InvalidInput, "replicated sample: non-finite measurement");
    pair_count_ += g.size() * (g.size() - 1) / 2;
  }
}

std::vector<double> ReplicatedSample::pair_differences() const
{
  std::vector<double> out;
  out.reserve(pair_count_);
  for (const auto& g : groups_)
    for (std::size_t k1 = 0; k1 < g.size(); ++k1)
      for (std::size_t k2 = k1 + 1; k2 < g.size(); ++k2)
        out.push_back(g[k1] - g[k2]);
  return out;
}

ErrorDensity::ErrorDensity(DensityKind kind, double scale, std::optional<double> lambda_delta)
  : kind_(kind), scale_(scale), lambda_delta_(lambda_delta)
{
}

ErrorDensity ErrorDensity::gaussian(double sigma)
{
  require_positive_scale(sigma, "gaussian sigma");
  return ErrorDensity(DensityKind::Gaussian, sigma, std::nullopt);
}

ErrorDensity ErrorDensity::laplace(double scale)
{
  require_positive_scale(scale, "laplace scale");
  return ErrorDensity(DensityKind::Laplace, scale, 2.0);
}

ErrorDensity ErrorDensity::uniform(double half_width)
{
  require_positive_scale(half_width, "uniform half-width");
  return ErrorDensity(DensityKind::Uniform, half_width, std::nullopt);
}

ErrorDensity ErrorDensity::custom(CustomDensity spec)
{
  if (!spec.density)
    throw Error(ErrorCode::InvalidInput, "custom density: no density function");
  require_positive_scale(spec.scale, "custom density scale");
  if (spec.lambda_delta && !(*spec.lambda_delta > 0.0))
    throw Error(ErrorCode::InvalidInput, "custom density: lambda_delta must be positive");
  if (spec.max_derivative_order > 0 && !spec.derivative)
    throw Error(ErrorCode::InvalidInput, "custom density: derivative order declared without a function");

  const double s = spec.scale;
  for (int k = -200; k <= 200; ++k) {
    const double u = s * k / 20.0;
    const double a = spec.density(u);
    const double b = spec.density(-u);
    if (!(a >= 0.0) || !std::isfinite(a))
      throw Error(ErrorCode::InvalidInput, "custom density: negative or non-finite value at u=" + shortest(u));
    if (std::abs(a - b) > 1e-12 * std::max(1.0, std::abs(a)))
      throw Error(ErrorCode::InvalidInput, "custom density: not symmetric at u=" + shortest(u));
  }
  const double mass = adaptive_simpson(spec.density, -50.0 * s, 50.0 * s, 1e-9);
  if (std::abs(mass - 1.0) > 1e-6)
    throw Error(ErrorCode::InvalidInput, "custom density: integrates to " + shortest(mass) + ", not 1");
  if (spec.characteristic && std::abs(spec.characteristic(0.0) - 1.0) > 1e-9)
    throw Error(ErrorCode::InvalidInput, "custom density: characteristic function is not 1 at t=0");

  ErrorDensity d(DensityKind::Custom, s, spec.lambda_delta);
  d.custom_ = std::move(spec);
  return d;
}

std::optional<double> ErrorDensity::variance() const
{
  switch (kind_) {
    case DensityKind::Gaussian: return scale_ * scale_;
    case DensityKind::Laplace: return 2.0 * scale_ * scale_;
    case DensityKind::Uniform: return scale_ * scale_ / 3.0;
    case DensityKind::Custom: return std::nullopt;
  }
  return std::nullopt;
}

bool ErrorDensity::has_characteristic() const noexcept
{
  return kind_ != DensityKind::Custom || static_cast<bool>(custom_->characteristic);
}

int ErrorDensity::max_derivative_order() const noexcept
{
  switch (kind_) {
    case DensityKind::Gaussian:
    case DensityKind::Laplace: return 2;
    case DensityKind::Uniform: return 0;
    case DensityKind::Custom: return custom_->max_derivative_order;
  }
  return 0;
}

double ErrorDensity::density(double u) const
{
  switch (kind_) {
    case DensityKind::Gaussian: {
      const double z = u / scale_;
      return std::exp(-0.5 * z * z) / (scale_ * std::sqrt(2.0 * std::numbers::pi));
    }
    case DensityKind::Laplace:
      return std::exp(-std::abs(u) / scale_) / (2.0 * scale_);
    case DensityKind::Uniform:
      // Closed support: the boundary points carry the interior value.
      return std::abs(u) <= scale_ ? 1.0 / (2.0 * scale_) : 0.0;
    case DensityKind::Custom:
      return custom_->density(u);
  }
  return 0.0;
}

double ErrorDensity::derivative(double u, int order) const
{
  if (order < 0 || order > 2)
    throw Error(ErrorCode::UnsupportedDerivative, "derivative order must be 0, 1 or 2");
  if (order == 0)
    return density(u);
  if (order > max_derivative_order())
    throw Error(ErrorCode::UnsupportedDerivative,
                describe() + " has no derivative of order " + std::to_string(order));

  switch (kind_) {
    case DensityKind::Gaussian: {
      const double s2 = scale_ * scale_;
      const double f = density(u);
      return order == 1 ? -(u / s2) * f : (u * u / (s2 * s2) - 1.0 / s2) * f;
    }
    case DensityKind::Laplace: {
      // Kink at 0: first derivative defined as 0 there, second derivative
      // takes the one-sided value f/b^2 (the point mass is dropped).
      const double f = density(u);
      if (order == 2)
        return f / (scale_ * scale_);
      if (u == 0.0)
        return 0.0;
      return (u > 0.0 ? -1.0 : 1.0) * f / scale_;
    }
    case DensityKind::Custom:
      return custom_->derivative(u, order);
    case DensityKind::Uniform:
      break;
  }
  throw Error(ErrorCode::UnsupportedDerivative, "uniform density is not differentiable");
}

double ErrorDensity::characteristic(double t) const
{
  switch (kind_) {
    case DensityKind::Gaussian: {
      const double st = scale_ * t;
      return std::exp(-0.5 * st * st);
    }
    case DensityKind::Laplace: {
      const double bt = scale_ * t;
      return 1.0 / (1.0 + bt * bt);
    }
    case DensityKind::Uniform: {
      const double at = scale_ * std::abs(t);
      return at == 0.0 ? 1.0 : std::sin(at) / at;
    }
    case DensityKind::Custom:
      if (!custom_->characteristic)
        throw Error(ErrorCode::MissingCharacteristicFunction,
                    custom_->name + " has no characteristic function");
      return custom_->characteristic(std::abs(t));
  }
  return 0.0;
}

std::string ErrorDensity::describe() const
{
  switch (kind_) {
    case DensityKind::Gaussian: return "gaussian:" + shortest(scale_);
    case DensityKind::Laplace: return "laplace:" + shortest(scale_);
    case DensityKind::Uniform: return "uniform:" + shortest(scale_);
    case DensityKind::Custom: return custom_->name;
  }
  return "unknown";
}

EvalGrid::EvalGrid(std::vector<double> points) : points_(std::move(points))
{
  if (points_.size() < 2)
    throw Error(ErrorCode::InvalidInput, "evaluation grid needs at least 2 points");
  if (!all_finite(points_))
    throw Error(ErrorCode::InvalidInput, "evaluation grid has non-finite points");
  for (std::size_t i = 1; i < points_.size(); ++i)
    if (!(points_[i] > points_[i - 1]))
      throw Error(ErrorCode::InvalidInput, "evaluation grid must be strictly increasing");
}

EvalGrid EvalGrid::uniform(double lo, double hi, std::size_t count)
{
  if (count < 2 || !(hi > lo))
    throw Error(ErrorCode::InvalidInput, "uniform grid needs lo < hi and count >= 2");
  std::vector<double> pts(count);
  const double step = (hi - lo) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i)
    pts[i] = lo + step * static_cast<double>(i);
  pts.back() = hi;
  return EvalGrid(std::move(pts));
}

std::size_t RegressionCurve::defined_count() const
{
  std::size_t n = 0;
  for (bool b : defined)
    n += b ? 1 : 0;
  return n;
}

void RegressionCurve::check_invariants() const
{
  const std::size_t n = grid.size();
  if (values.size() != n || defined.size() != n)
    throw Error(ErrorCode::InvalidInput, "curve: values not aligned with grid");
  if (variance && variance->size() != n)
    throw Error(ErrorCode::InvalidInput, "curve: variance not aligned with grid");
  if (band_lower.has_value() != band_upper.has_value())
    throw Error(ErrorCode::InvalidInput, "curve: only one band side present");
  if (band_lower) {
    if (band_lower->size() != n || band_upper->size() != n)
      throw Error(ErrorCode::InvalidInput, "curve: bands not aligned with grid");
    for (std::size_t i = 0; i < n; ++i)
      if (defined[i] && !((*band_lower)[i] <= values[i] && values[i] <= (*band_upper)[i]))
        throw Error(ErrorCode::InvalidInput, "curve: band does not bracket value");
  }
}

} // namespace coarse
