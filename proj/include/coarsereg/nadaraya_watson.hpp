#pragma once

#include "coarsereg/data_model.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace coarse {

//! Geometric bandwidth candidates factor * sd(X) * n^{-1/5}, factors from
//! min_factor to max_factor.
struct CvGridSpec {
  std::size_t count = 32;
  double min_factor = 0.05;
  double max_factor = 2.0;
};

struct NwConfig {
  std::optional<double> bandwidth; //!< empty selects by cross-validation
  CvGridSpec cv_grid;
};

//! Gaussian-kernel Nadaraya-Watson estimate on a sample of (X, Y). Throws
//! DegenerateDenominator when every kernel weight at x underflows.
double nw_estimate(const TrainingSample& sample, double bandwidth, double x);

RegressionCurve nw_curve(const TrainingSample& sample, double bandwidth, const EvalGrid& grid);

std::vector<double> cv_candidates(const TrainingSample& sample, const CvGridSpec& spec);

//! Leave-one-out score sum_i (Y_i - m_N^{(-i)}(X_i; h))^2; +inf when any
//! held-out point has a degenerate denominator.
double cv_score(const TrainingSample& sample, double bandwidth);

struct CvResult {
  double bandwidth = 0.0;
  std::vector<double> candidates;
  std::vector<double> scores;
};

//! Minimiser over the candidates; ties go to the smaller bandwidth.
CvResult cv_bandwidth(const TrainingSample& sample, std::span<const double> candidates);
CvResult cv_bandwidth(const TrainingSample& sample, const NwConfig& config);

} // namespace coarse
