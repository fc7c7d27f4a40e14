#pragma once

#include "coarsereg/data_model.hpp"

#include <cstddef>
#include <optional>
#include <vector>

namespace coarse {

//! A point is undefined when psi_hat(x) falls below this absolute level.
inline constexpr double kDegeneracyThreshold = 1e-12;

double estimate_psi(const TrainingSample& sample, const ErrorDensity& density, double x);
double estimate_phi(const TrainingSample& sample, const ErrorDensity& density, double x);

//! psi_hat and phi_hat from a single pass over the sample.
struct RatioParts {
  double phi = 0.0;
  double psi = 0.0;
};

RatioParts estimate_ratio_parts(const TrainingSample& sample, const ErrorDensity& density, double x);

//! m_hat(x) or nullopt where psi_hat(x) < kDegeneracyThreshold.
std::optional<double> estimate_m_at(const TrainingSample& sample, const ErrorDensity& density, double x);

//! Smoothing-free ratio estimator on a grid. Throws AllDegenerate when no
//! grid point is defined.
RegressionCurve estimate_m(const TrainingSample& sample,
                           const ErrorDensity& density,
                           const EvalGrid& grid,
                           unsigned threads = 1);

//! First derivative of m_hat by the quotient rule with derivative kernels.
double estimate_m_derivative(const TrainingSample& sample, const ErrorDensity& density, double x);

enum class ExtremumKind { Max, Min };

struct SearchOptions {
  std::size_t scan_points = 512;
  double location_tolerance = 1e-8;
  double root_tolerance = 1e-10;
};

struct Extremum {
  double location = 0.0;
  double value = 0.0;
};

//! Coarse scan followed by golden-section refinement on the bracket around
//! the best scan node. Throws DegenerateDenominator if any scan node is
//! undefined.
Extremum find_extremum(const TrainingSample& sample,
                       const ErrorDensity& density,
                       double lo,
                       double hi,
                       ExtremumKind kind,
                       const SearchOptions& options = {});

//! All strict sign changes of m_hat - level on the scan, bisected.
std::vector<double> find_zeros(const TrainingSample& sample,
                               const ErrorDensity& density,
                               double lo,
                               double hi,
                               double level,
                               const SearchOptions& options = {});

} // namespace coarse
