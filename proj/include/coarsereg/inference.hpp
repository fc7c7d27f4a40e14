#pragma once

#include "coarsereg/data_model.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <span>

namespace coarse {

//! Product-kernel sample averages at (x1, x2): weights 1, Y and Y^2.
struct SecondMoments {
  double mu_hat = 0.0;
  double phi1_hat = 0.0;
  double psi1_hat = 0.0;
  double x1 = 0.0;
  double x2 = 0.0;
};

SecondMoments estimate_second_moments(const TrainingSample& sample,
                                      const ErrorDensity& density,
                                      double x1,
                                      double x2);

//! Plug-in estimate of the limiting variance of sqrt(n)(m_hat(x) - m(x)).
double estimate_variance(const TrainingSample& sample, const ErrorDensity& density, double x);

//! Plug-in covariance of the limiting Gaussian process on a grid.
struct CovarianceMatrix {
  EvalGrid grid;
  Eigen::MatrixXd entries;
};

CovarianceMatrix estimate_covariance(const TrainingSample& sample,
                                     const ErrorDensity& density,
                                     const EvalGrid& grid);

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

//! m_hat(x) -/+ n^{-1/2} V_hat(x)^{1/2} z_{1-alpha/2}.
Interval pointwise_ci(const TrainingSample& sample,
                      const ErrorDensity& density,
                      double x,
                      double alpha);

//! Pointwise intervals over a grid: variance plus band columns.
RegressionCurve pointwise_band(const TrainingSample& sample,
                               const ErrorDensity& density,
                               const EvalGrid& grid,
                               double alpha);

//! Studentisation floor for sup statistics at near-degenerate grid points.
inline constexpr double kStudentFloor = 1e-12;
//! Relative eigenvalue cut for the covariance square root.
inline constexpr double kEigenClamp = 1e-12;

//! (1 - alpha) empirical quantile (nearest rank) of
//! max_j |Z_j| / max(var_j, floor)^{1/2} for Z ~ N(0, cov). Draws come in
//! fixed-size blocks seeded from (seed, block index), so the result does
//! not depend on `threads`.
double sup_quantile(const Eigen::MatrixXd& cov,
                    std::span<const double> var,
                    double alpha,
                    std::size_t n_sim,
                    std::uint64_t seed,
                    unsigned threads = 1);

//! Simultaneous band m_hat -/+ q* (V_hat / n)^{1/2}, q* from simulating the
//! estimated limit process. parameters["critical_value"] holds q*.
RegressionCurve simultaneous_band(const TrainingSample& sample,
                                  const ErrorDensity& density,
                                  const EvalGrid& grid,
                                  double alpha,
                                  std::size_t n_sim = 10000,
                                  std::uint64_t seed = 0,
                                  unsigned threads = 1);

} // namespace coarse
