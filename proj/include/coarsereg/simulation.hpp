#pragma once

#include "coarsereg/data_model.hpp"
#include "coarsereg/nadaraya_watson.hpp"

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace coarse {

//! Regression models of the simulation study.
//!   M1:          g(w) = 3w + 20 (2 pi)^{-1/2} exp(-200 (w - 1/2)^2) on [0, 1],
//!                W ~ U[0, 1], Y = g(W) + N(0, sigma_eps^2)
//!   M2Logistic:  g(w) = e^{6w} / (1 + e^{6w}), W ~ U[-1/2, 1/2], Y ~ Bernoulli(g)
//!   M2Sine:      g(w) = 0.45 sin(a pi w) + 0.5, W ~ U[0, 1], Y ~ Bernoulli(g)
//!   Constant:    synthetic g = constant_level, W ~ U[0, 1], Gaussian noise
enum class Model { M1, M2Logistic, M2Sine, Constant };
enum class DeltaKind { Gaussian, Uniform };

struct ScenarioConfig {
  Model model = Model::M1;
  double sine_a = 2.0;
  double constant_level = 0.0;
  std::size_t n = 250;
  //! var(delta) / var(W); zero gives the degenerate (no contamination) limit.
  double ns_delta = 0.25;
  //! var(eps) / sup|g|; must be absent for Bernoulli responses.
  std::optional<double> ns_eps;
  DeltaKind delta_kind = DeltaKind::Gaussian;
  std::uint64_t seed = 0;
};

void validate(const ScenarioConfig& scenario);
bool bernoulli_response(Model model) noexcept;
std::string model_name(const ScenarioConfig& scenario);

double regression_function(const ScenarioConfig& scenario, double w);
//! sup_w |g(w)| over the support of W.
double regression_sup(const ScenarioConfig& scenario);
//! Support [lo, hi] of the uniform law of W.
std::pair<double, double> w_support(Model model) noexcept;
double w_variance(Model model) noexcept;

struct NoiseCalibration {
  double sigma_delta_sq = 0.0;
  std::optional<double> sigma_eps_sq;
  //! sqrt(3 sigma_delta^2); meaningful for uniform contamination.
  double uniform_half_width = 0.0;
};

NoiseCalibration calibrate_noise(const ScenarioConfig& scenario);

//! The scenario's true contamination law; nullopt when ns_delta == 0.
std::optional<ErrorDensity> true_error_density(const ScenarioConfig& scenario);

//! Variance-matched stand-ins for misspecification studies.
ErrorDensity gaussian_matched(double variance);
ErrorDensity uniform_matched(double variance);
ErrorDensity laplace_matched(double variance);

struct SimulatedDataset {
  std::vector<double> w;
  std::vector<double> x;
  std::vector<double> y;
  ScenarioConfig scenario;
};

SimulatedDataset generate(const ScenarioConfig& scenario, std::mt19937_64& rng);
//! Seeds a generator from scenario.seed.
SimulatedDataset generate(const ScenarioConfig& scenario);

//! True m(x) by quadrature of the smeared regression ratio (absolute
//! tolerance 1e-8). Throws DegenerateDenominator outside the smeared support.
double oracle_m(const ScenarioConfig& scenario, double x);

//! Support of W widened by 2 sigma_delta (Gaussian) or the half-width (Uniform).
EvalGrid default_ise_grid(const ScenarioConfig& scenario, std::size_t count = 201);

struct IseResult {
  double value = 0.0;
  //! Subintervals skipped because an endpoint is undefined.
  std::size_t excluded_intervals = 0;
};

//! Trapezoid integral of (curve - truth)^2 over the curve's grid. `truth`
//! is aligned with the grid; non-finite truth values are treated as undefined.
IseResult ise(const RegressionCurve& curve, std::span<const double> truth);
IseResult ise(const RegressionCurve& curve, const ScenarioConfig& scenario);

enum class EstimatorKind { KnownError, NadarayaWatson };
enum class DensityChoice { Correct, GaussianMatched, UniformMatched, LaplaceMatched, Explicit };

struct EstimatorSpec {
  EstimatorKind kind = EstimatorKind::KnownError;
  DensityChoice density = DensityChoice::Correct;
  std::optional<ErrorDensity> explicit_density;
  NwConfig nw;
  //! Locations for coverage and RMSE summaries.
  std::vector<double> points;
  double alpha = 0.05;

  std::string label() const;
};

//! Resolves the working density for a known-error fit in this scenario.
ErrorDensity working_density(const EstimatorSpec& spec, const ScenarioConfig& scenario);

struct PointSummary {
  double x = 0.0;
  double truth = 0.0;
  std::size_t estimates = 0;
  double rmse = 0.0;
  double bias = 0.0;
  //! Pointwise-CI coverage; trials == 0 for estimators without intervals.
  std::size_t ci_trials = 0;
  std::size_t ci_covered = 0;
};

struct DecileCurve {
  int decile = 0;
  std::size_t rank = 0; //!< 1-based rank in the ordered ISE list
  std::size_t replicate = 0;
  double ise = 0.0;
  std::vector<double> values;
};

struct StudyReport {
  ScenarioConfig scenario;
  std::string estimator;
  std::size_t replications = 0;
  std::uint64_t master_seed = 0;
  std::vector<double> grid;
  std::vector<double> truth;
  //! Indexed by replicate; NaN for failed replicates.
  std::vector<double> ise;
  std::size_t failures = 0;
  std::map<std::string, std::size_t> failure_codes;
  std::size_t excluded_intervals = 0;
  double median_ise = 0.0;
  std::vector<DecileCurve> deciles;
  std::vector<PointSummary> points;
};

//! Nearest-rank positions ceil(R/10), ceil(5R/10), ceil(9R/10).
std::vector<std::size_t> decile_ranks(std::size_t successful);

//! Replicate r uses seed derive_seed(master_seed, r); the report does not
//! depend on `threads`.
StudyReport run_replications(const ScenarioConfig& scenario,
                             const EstimatorSpec& spec,
                             std::size_t replications,
                             const EvalGrid& grid,
                             std::uint64_t master_seed,
                             unsigned threads = 1);

} // namespace coarse
