#include "coarsereg/inference.hpp"

#include "coarsereg/errors.hpp"
#include "coarsereg/known_error.hpp"
#include "coarsereg/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace coarse {

namespace {

void check_alpha(double alpha)
{
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw Error(ErrorCode::InvalidInput, "alpha must lie in (0, 1]");
}

double z_critical(double alpha)
{
  return alpha >= 1.0 ? 0.0 : normal_quantile(1.0 - alpha / 2.0);
}

struct PointMoments {
  double psi = 0.0;
  double phi = 0.0;
  double psi1 = 0.0;
  double mu = 0.0;
  double phi1 = 0.0;
};

PointMoments diagonal_moments(const TrainingSample& sample, const ErrorDensity& density, double x)
{
  const auto w = sample.w();
  const auto y = sample.y();
  CompensatedSum psi, phi, psi1, mu, phi1;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double k = density.density(x - w[i]);
    const double kk = k * k;
    psi += k;
    phi += y[i] * k;
    psi1 += kk;
    mu += y[i] * kk;
    phi1 += y[i] * y[i] * kk;
  }
  const double n = static_cast<double>(w.size());
  return {psi.value() / n, phi.value() / n, psi1.value() / n, mu.value() / n, phi1.value() / n};
}

double variance_from_moments(const PointMoments& m, double x)
{
  if (m.psi < kDegeneracyThreshold)
    throw Error(ErrorCode::DegenerateDenominator,
                "psi_hat below threshold at x=" + std::to_string(x));
  const double p2 = m.psi * m.psi;
  const double t1 = m.phi1 / p2;
  const double t2 = m.phi * m.phi * m.psi1 / (p2 * p2);
  const double t3 = 2.0 * m.phi * m.mu / (p2 * m.psi);
  const double v = t1 + t2 - t3;
  // The three terms cancel algebraically to a nonnegative quantity. Results
  // at roundoff level (e.g. constant responses) are snapped to zero, and
  // small negative ones are clamped.
  const double terms = std::abs(t1) + std::abs(t2) + std::abs(t3);
  if (std::abs(v) <= 1e-12 * terms)
    return 0.0;
  if (v >= 0.0)
    return v;
  if (-v <= 1e-10 * std::max(1.0, terms))
    return 0.0;
  throw Error(ErrorCode::InvalidInput,
              "variance estimate significantly negative at x=" + std::to_string(x));
}

} // namespace

SecondMoments estimate_second_moments(const TrainingSample& sample,
                                      const ErrorDensity& density,
                                      double x1,
                                      double x2)
{
  const auto w = sample.w();
  const auto y = sample.y();
  CompensatedSum psi1, mu, phi1;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double kk = density.density(x1 - w[i]) * density.density(x2 - w[i]);
    psi1 += kk;
    mu += y[i] * kk;
    phi1 += y[i] * y[i] * kk;
  }
  const double n = static_cast<double>(w.size());
  return {mu.value() / n, phi1.value() / n, psi1.value() / n, x1, x2};
}

double estimate_variance(const TrainingSample& sample, const ErrorDensity& density, double x)
{
  return variance_from_moments(diagonal_moments(sample, density, x), x);
}

CovarianceMatrix estimate_covariance(const TrainingSample& sample,
                                     const ErrorDensity& density,
                                     const EvalGrid& grid)
{
  const std::size_t g = grid.size();
  const std::size_t n = sample.size();
  const auto w = sample.w();
  const auto y = sample.y();

  Eigen::MatrixXd kernel(g, n);
  for (std::size_t j = 0; j < g; ++j)
    for (std::size_t i = 0; i < n; ++i)
      kernel(j, i) = density.density(grid[j] - w[i]);

  Eigen::VectorXd psi(g), phi(g), var(g);
  for (std::size_t j = 0; j < g; ++j) {
    const auto parts = estimate_ratio_parts(sample, density, grid[j]);
    if (parts.psi < kDegeneracyThreshold)
      throw Error(ErrorCode::DegenerateDenominator,
                  "psi_hat below threshold at grid point " + std::to_string(j) + " (x=" +
                    std::to_string(grid[j]) + ")");
    psi(j) = parts.psi;
    phi(j) = parts.phi;
    var(j) = estimate_variance(sample, density, grid[j]);
  }

  const Eigen::Map<const Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(n));
  const double inv_n = 1.0 / static_cast<double>(n);
  const Eigen::MatrixXd psi1 = kernel * kernel.transpose() * inv_n;
  const Eigen::MatrixXd mu = kernel * yv.asDiagonal() * kernel.transpose() * inv_n;
  const Eigen::MatrixXd phi1 =
    kernel * yv.cwiseAbs2().asDiagonal() * kernel.transpose() * inv_n;

  Eigen::MatrixXd c(g, g);
  for (std::size_t j = 0; j < g; ++j) {
    c(j, j) = var(j);
    for (std::size_t l = j + 1; l < g; ++l) {
      const double pj = psi(j), pl = psi(l);
      const double denom = pj * pj * pl * pl;
      const double a = phi1(j, l) / (pj * pl);
      const double b = psi1(j, l) * phi(j) * phi(l) / denom;
      const double d = mu(j, l) * (phi(j) * pl + phi(l) * pj) / denom;
      double value = a + b - d;
      if (std::abs(value) <= 1e-12 * (std::abs(a) + std::abs(b) + std::abs(d)))
        value = 0.0;
      c(j, l) = value;
      c(l, j) = value;
    }
  }
  return {grid, std::move(c)};
}

Interval pointwise_ci(const TrainingSample& sample,
                      const ErrorDensity& density,
                      double x,
                      double alpha)
{
  check_alpha(alpha);
  if (sample.size() < 2)
    throw Error(ErrorCode::InvalidInput, "confidence interval needs n >= 2");
  const auto m = diagonal_moments(sample, density, x);
  const double v = variance_from_moments(m, x);
  const double centre = m.phi / m.psi;
  const double half = z_critical(alpha) * std::sqrt(v / static_cast<double>(sample.size()));
  return {centre - half, centre + half};
}

RegressionCurve pointwise_band(const TrainingSample& sample,
                               const ErrorDensity& density,
                               const EvalGrid& grid,
                               double alpha)
{
  check_alpha(alpha);
  if (sample.size() < 2)
    throw Error(ErrorCode::InvalidInput, "confidence interval needs n >= 2");
  const std::size_t g = grid.size();
  const double z = z_critical(alpha);
  const double n = static_cast<double>(sample.size());
  std::vector<double> values(g), var(g), lower(g), upper(g);
  for (std::size_t j = 0; j < g; ++j) {
    const auto m = diagonal_moments(sample, density, grid[j]);
    var[j] = variance_from_moments(m, grid[j]);
    values[j] = m.phi / m.psi;
    const double half = z * std::sqrt(var[j] / n);
    lower[j] = values[j] - half;
    upper[j] = values[j] + half;
  }
  RegressionCurve curve{grid, std::move(values), std::vector<bool>(g, true)};
  curve.variance = std::move(var);
  curve.band_lower = std::move(lower);
  curve.band_upper = std::move(upper);
  curve.label = "pointwise_ci";
  curve.parameters["alpha"] = alpha;
  curve.parameters["critical_value"] = z;
  curve.parameters["n"] = n;
  return curve;
}

double sup_quantile(const Eigen::MatrixXd& cov,
                    std::span<const double> var,
                    double alpha,
                    std::size_t n_sim,
                    std::uint64_t seed,
                    unsigned threads)
{
  check_alpha(alpha);
  const auto g = cov.rows();
  if (cov.cols() != g || static_cast<std::size_t>(g) != var.size() || g == 0)
    throw Error(ErrorCode::InvalidInput, "sup_quantile: covariance and variance sizes disagree");
  if (n_sim == 0)
    throw Error(ErrorCode::InvalidInput, "sup_quantile: n_sim must be positive");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (cov + cov.transpose()));
  Eigen::VectorXd lambda = eig.eigenvalues();
  const double top = lambda.maxCoeff();
  if (!(top > 0.0))
    return 0.0;
  for (Eigen::Index k = 0; k < lambda.size(); ++k)
    lambda(k) = lambda(k) < kEigenClamp * top ? 0.0 : std::sqrt(lambda(k));
  const Eigen::MatrixXd root =
    eig.eigenvectors() * lambda.asDiagonal() * eig.eigenvectors().transpose();

  Eigen::VectorXd inv_sd(g);
  for (Eigen::Index j = 0; j < g; ++j)
    inv_sd(j) = 1.0 / std::sqrt(std::max(var[static_cast<std::size_t>(j)], kStudentFloor));

  constexpr std::size_t block = 1024;
  const std::size_t blocks = (n_sim + block - 1) / block;
  std::vector<double> stats(n_sim);
  parallel_for(blocks, threads, [&](std::size_t b) {
    std::mt19937_64 rng(derive_seed(seed, b));
    std::normal_distribution<double> normal;
    Eigen::VectorXd xi(g);
    const std::size_t end = std::min(n_sim, (b + 1) * block);
    for (std::size_t s = b * block; s < end; ++s) {
      for (Eigen::Index j = 0; j < g; ++j)
        xi(j) = normal(rng);
      const Eigen::VectorXd z = root * xi;
      stats[s] = z.cwiseAbs().cwiseProduct(inv_sd).maxCoeff();
    }
  });

  const auto rank = static_cast<std::size_t>(
    std::ceil((1.0 - alpha) * static_cast<double>(n_sim) - 1e-9));
  const std::size_t k = std::clamp<std::size_t>(rank, 1, n_sim) - 1;
  std::nth_element(stats.begin(), stats.begin() + static_cast<std::ptrdiff_t>(k), stats.end());
  return stats[k];
}

RegressionCurve simultaneous_band(const TrainingSample& sample,
                                  const ErrorDensity& density,
                                  const EvalGrid& grid,
                                  double alpha,
                                  std::size_t n_sim,
                                  std::uint64_t seed,
                                  unsigned threads)
{
  check_alpha(alpha);
  if (sample.size() < 2)
    throw Error(ErrorCode::InvalidInput, "simultaneous band needs n >= 2");
  const auto cov = estimate_covariance(sample, density, grid);
  const std::size_t g = grid.size();
  const double n = static_cast<double>(sample.size());

  std::vector<double> values(g), var(g), scaled_var(g);
  for (std::size_t j = 0; j < g; ++j) {
    const auto parts = estimate_ratio_parts(sample, density, grid[j]);
    values[j] = parts.phi / parts.psi;
    var[j] = cov.entries(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j));
    scaled_var[j] = var[j] / n;
  }

  RegressionCurve curve{grid, values, std::vector<bool>(g, true)};
  curve.label = "simultaneous_band";
  curve.parameters["alpha"] = alpha;
  curve.parameters["n_sim"] = static_cast<double>(n_sim);
  curve.parameters["n"] = n;

  double q = 0.0;
  if (cov.entries.cwiseAbs().maxCoeff() == 0.0)
    curve.warnings.push_back("degenerate covariance: zero-width band");
  else
    q = sup_quantile(cov.entries / n, scaled_var, alpha, n_sim, seed, threads);
  curve.parameters["critical_value"] = q;

  std::vector<double> lower(g), upper(g);
  for (std::size_t j = 0; j < g; ++j) {
    const double half = q * std::sqrt(scaled_var[j]);
    lower[j] = values[j] - half;
    upper[j] = values[j] + half;
  }
  curve.variance = std::move(var);
  curve.band_lower = std::move(lower);
  curve.band_upper = std::move(upper);
  return curve;
}

} // namespace coarse
