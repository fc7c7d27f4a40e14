#pragma once

#include "coarsereg/data_model.hpp"
#include "coarsereg/fourier.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace coarse {

//! Least-squares fit of X' = intercept + slope * T' + delta'.
struct LinearProxyFit {
  double intercept = 0.0;
  double slope = 0.0;
  std::size_t r = 0;
  //! Residual variance with divisor r - 2.
  double sigma_delta_sq = 0.0;
};

LinearProxyFit fit_linear_proxy(std::span<const double> t, std::span<const double> x);

//! W_hat_i = intercept + slope * T_i.
std::vector<double> impute_w(const LinearProxyFit& fit, std::span<const double> t);

//! Sample variance (divisor count - 1) of X_i - W_hat_i on a possibly
//! different sample than the one used for fitting.
double estimate_error_variance(const LinearProxyFit& fit,
                               std::span<const double> t,
                               std::span<const double> x);

//! Known-density estimator on (W_hat, Y).
RegressionCurve estimate_m_proxy(const LinearProxyFit& fit,
                                 std::span<const double> t,
                                 std::span<const double> y,
                                 const ErrorDensity& density,
                                 const EvalGrid& grid);

//! Fourier estimator with W_hat substituted into the empirical CFs.
RegressionCurve estimate_m_fourier_proxy(const LinearProxyFit& fit,
                                         std::span<const double> t,
                                         std::span<const double> y,
                                         const ReplicatedSample& replicates,
                                         const FourierConfig& config,
                                         const EvalGrid& grid);

//! One-shot outlier deletion before the final fit: drop the extreme order
//! statistics of T and X (all ranked on the original data), fit on the
//! survivors, drop the `farthest` points with the largest absolute
//! residuals, and refit. The line is not refit between single deletions.
struct TrimSpec {
  std::size_t t_low = 0;
  std::size_t t_high = 0;
  std::size_t x_low = 0;
  std::size_t x_high = 0;
  std::size_t farthest = 0;
};

struct TrimmedFit {
  LinearProxyFit fit;
  std::vector<std::size_t> kept; //!< indices into the input, ascending
};

TrimmedFit trim_and_fit(std::span<const double> t, std::span<const double> x, const TrimSpec& spec);

} // namespace coarse
