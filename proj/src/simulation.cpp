#include "coarsereg/simulation.hpp"

#include "coarsereg/errors.hpp"
#include "coarsereg/inference.hpp"
#include "coarsereg/known_error.hpp"
#include "coarsereg/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace coarse {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double m1_g(double w)
{
  if (w < 0.0 || w > 1.0)
    return 0.0;
  const double d = w - 0.5;
  return 3.0 * w + 20.0 / std::sqrt(2.0 * std::numbers::pi) * std::exp(-200.0 * d * d);
}

double m1_sup()
{
  // The spike dominates; scan then refine around the best node.
  static const double value = [] {
    constexpr std::size_t count = 100001;
    std::size_t best = 0;
    double fbest = -1.0;
    for (std::size_t k = 0; k < count; ++k) {
      const double v = m1_g(static_cast<double>(k) / (count - 1));
      if (v > fbest) {
        fbest = v;
        best = k;
      }
    }
    const double h = 1.0 / (count - 1);
    const double lo = std::max(0.0, (static_cast<double>(best) - 1.0) * h);
    const double hi = std::min(1.0, (static_cast<double>(best) + 1.0) * h);
    const double loc = golden_section_max(m1_g, lo, hi, 1e-12);
    return std::max(fbest, m1_g(loc));
  }();
  return value;
}

} // namespace

bool bernoulli_response(Model model) noexcept
{
  return model == Model::M2Logistic || model == Model::M2Sine;
}

std::string model_name(const ScenarioConfig& scenario)
{
  switch (scenario.model) {
    case Model::M1: return "m1";
    case Model::M2Logistic: return "m2-logistic";
    case Model::M2Sine: return "m2-sine";
    case Model::Constant: return "constant";
  }
  return "unknown";
}

void validate(const ScenarioConfig& scenario)
{
  if (scenario.n < 2)
    throw Error(ErrorCode::InvalidInput, "scenario: n must be at least 2");
  if (!(scenario.ns_delta >= 0.0) || !std::isfinite(scenario.ns_delta))
    throw Error(ErrorCode::InvalidInput, "scenario: ns_delta must be nonnegative");
  if (bernoulli_response(scenario.model)) {
    if (scenario.ns_eps)
      throw Error(ErrorCode::InvalidInput, "scenario: ns_eps does not apply to Bernoulli responses");
  } else if (!scenario.ns_eps || !(*scenario.ns_eps >= 0.0) || !std::isfinite(*scenario.ns_eps)) {
    throw Error(ErrorCode::InvalidInput, "scenario: ns_eps must be given and nonnegative");
  }
  if (scenario.model == Model::M2Sine && !(scenario.sine_a > 0.0))
    throw Error(ErrorCode::InvalidInput, "scenario: sine frequency a must be positive");
}

double regression_function(const ScenarioConfig& scenario, double w)
{
  switch (scenario.model) {
    case Model::M1: return m1_g(w);
    case Model::M2Logistic: return 1.0 / (1.0 + std::exp(-6.0 * w));
    case Model::M2Sine: return 0.45 * std::sin(scenario.sine_a * std::numbers::pi * w) + 0.5;
    case Model::Constant: return scenario.constant_level;
  }
  return 0.0;
}

double regression_sup(const ScenarioConfig& scenario)
{
  switch (scenario.model) {
    case Model::M1: return m1_sup();
    case Model::M2Logistic: return 1.0 / (1.0 + std::exp(-3.0));
    case Model::M2Sine: {
      // |sin| reaches 1 on [0, 1] once a >= 1/2.
      if (scenario.sine_a >= 0.5)
        return 0.95;
      return 0.45 * std::sin(scenario.sine_a * std::numbers::pi) + 0.5;
    }
    case Model::Constant: return std::abs(scenario.constant_level);
  }
  return 0.0;
}

std::pair<double, double> w_support(Model model) noexcept
{
  return model == Model::M2Logistic ? std::pair{-0.5, 0.5} : std::pair{0.0, 1.0};
}

double w_variance(Model) noexcept
{
  return 1.0 / 12.0;
}

NoiseCalibration calibrate_noise(const ScenarioConfig& scenario)
{
  validate(scenario);
  NoiseCalibration out;
  out.sigma_delta_sq = scenario.ns_delta * w_variance(scenario.model);
  out.uniform_half_width = std::sqrt(3.0 * out.sigma_delta_sq);
  if (scenario.ns_eps)
    out.sigma_eps_sq = *scenario.ns_eps * regression_sup(scenario);
  return out;
}

ErrorDensity gaussian_matched(double variance)
{
  return ErrorDensity::gaussian(std::sqrt(variance));
}

ErrorDensity uniform_matched(double variance)
{
  return ErrorDensity::uniform(std::sqrt(3.0 * variance));
}

ErrorDensity laplace_matched(double variance)
{
  return ErrorDensity::laplace(std::sqrt(variance / 2.0));
}

std::optional<ErrorDensity> true_error_density(const ScenarioConfig& scenario)
{
  const auto cal = calibrate_noise(scenario);
  if (cal.sigma_delta_sq == 0.0)
    return std::nullopt;
  return scenario.delta_kind == DeltaKind::Gaussian ? gaussian_matched(cal.sigma_delta_sq)
                                                    : uniform_matched(cal.sigma_delta_sq);
}

SimulatedDataset generate(const ScenarioConfig& scenario, std::mt19937_64& rng)
{
  const auto cal = calibrate_noise(scenario);
  const auto [lo, hi] = w_support(scenario.model);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double sd_delta = std::sqrt(cal.sigma_delta_sq);
  const double sd_eps = cal.sigma_eps_sq ? std::sqrt(*cal.sigma_eps_sq) : 0.0;

  SimulatedDataset out;
  out.scenario = scenario;
  out.w.reserve(scenario.n);
  out.x.reserve(scenario.n);
  out.y.reserve(scenario.n);
  for (std::size_t i = 0; i < scenario.n; ++i) {
    const double w = lo + (hi - lo) * unit(rng);
    double delta = 0.0;
    if (scenario.delta_kind == DeltaKind::Gaussian)
      delta = sd_delta * normal(rng);
    else
      delta = cal.uniform_half_width * (2.0 * unit(rng) - 1.0);
    const double g = regression_function(scenario, w);
    double y;
    if (bernoulli_response(scenario.model))
      y = unit(rng) < g ? 1.0 : 0.0;
    else
      y = g + sd_eps * normal(rng);
    out.w.push_back(w);
    out.x.push_back(w + delta);
    out.y.push_back(y);
  }
  return out;
}

SimulatedDataset generate(const ScenarioConfig& scenario)
{
  std::mt19937_64 rng(scenario.seed);
  return generate(scenario, rng);
}

double oracle_m(const ScenarioConfig& scenario, double x)
{
  const auto cal = calibrate_noise(scenario);
  const auto [lo, hi] = w_support(scenario.model);
  if (cal.sigma_delta_sq == 0.0) {
    if (x < lo || x > hi)
      throw Error(ErrorCode::DegenerateDenominator, "x outside the support of W");
    return regression_function(scenario, x);
  }

  const auto density = *true_error_density(scenario);
  const double reach = scenario.delta_kind == DeltaKind::Uniform
                         ? cal.uniform_half_width
                         : 12.0 * std::sqrt(cal.sigma_delta_sq);
  const double a = std::max(lo, x - reach);
  const double b = std::min(hi, x + reach);
  if (!(b > a))
    throw Error(ErrorCode::DegenerateDenominator,
                "x=" + std::to_string(x) + " outside the smeared support of W");

  // Split at the centre of the M1 spike so the adaptive rule sees it.
  std::vector<double> cuts{a};
  if (scenario.model == Model::M1 && a < 0.5 && 0.5 < b)
    cuts.push_back(0.5);
  cuts.push_back(b);

  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    num += adaptive_simpson(
      [&](double w) { return regression_function(scenario, w) * density.density(x - w); },
      cuts[k], cuts[k + 1], 1e-11);
    den += adaptive_simpson([&](double w) { return density.density(x - w); }, cuts[k],
                            cuts[k + 1], 1e-11);
  }
  if (den < kDegeneracyThreshold)
    throw Error(ErrorCode::DegenerateDenominator,
                "psi(x) vanishes at x=" + std::to_string(x));
  return num / den;
}

EvalGrid default_ise_grid(const ScenarioConfig& scenario, std::size_t count)
{
  const auto cal = calibrate_noise(scenario);
  const auto [lo, hi] = w_support(scenario.model);
  const double widen = scenario.delta_kind == DeltaKind::Uniform
                         ? cal.uniform_half_width
                         : 2.0 * std::sqrt(cal.sigma_delta_sq);
  return EvalGrid::uniform(lo - widen, hi + widen, count);
}

IseResult ise(const RegressionCurve& curve, std::span<const double> truth)
{
  const auto x = curve.grid.points();
  if (truth.size() != x.size() || curve.values.size() != x.size())
    throw Error(ErrorCode::InvalidInput, "ise: truth not aligned with the curve grid");
  IseResult out;
  CompensatedSum acc;
  auto ok = [&](std::size_t i) { return curve.defined[i] && std::isfinite(truth[i]); };
  for (std::size_t i = 1; i < x.size(); ++i) {
    if (!ok(i - 1) || !ok(i)) {
      ++out.excluded_intervals;
      continue;
    }
    const double e0 = curve.values[i - 1] - truth[i - 1];
    const double e1 = curve.values[i] - truth[i];
    acc += 0.5 * (x[i] - x[i - 1]) * (e0 * e0 + e1 * e1);
  }
  out.value = acc.value();
  return out;
}

IseResult ise(const RegressionCurve& curve, const ScenarioConfig& scenario)
{
  std::vector<double> truth(curve.grid.size());
  for (std::size_t j = 0; j < truth.size(); ++j) {
    try {
      truth[j] = oracle_m(scenario, curve.grid[j]);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateDenominator)
        throw;
      truth[j] = kNaN;
    }
  }
  return ise(curve, truth);
}

std::string EstimatorSpec::label() const
{
  if (kind == EstimatorKind::NadarayaWatson)
    return nw.bandwidth ? "nw:fixed" : "nw:cv";
  switch (density) {
    case DensityChoice::Correct: return "known:correct";
    case DensityChoice::GaussianMatched: return "known:gaussian-matched";
    case DensityChoice::UniformMatched: return "known:uniform-matched";
    case DensityChoice::LaplaceMatched: return "known:laplace-matched";
    case DensityChoice::Explicit:
      return "known:" + (explicit_density ? explicit_density->describe() : std::string("?"));
  }
  return "known";
}

ErrorDensity working_density(const EstimatorSpec& spec, const ScenarioConfig& scenario)
{
  if (spec.density == DensityChoice::Explicit) {
    if (!spec.explicit_density)
      throw Error(ErrorCode::InvalidInput, "estimator: explicit density choice without a density");
    return *spec.explicit_density;
  }
  const auto cal = calibrate_noise(scenario);
  if (cal.sigma_delta_sq == 0.0)
    throw Error(ErrorCode::InvalidInput,
                "estimator: the scenario has no contamination, supply an explicit density");
  switch (spec.density) {
    case DensityChoice::Correct: return *true_error_density(scenario);
    case DensityChoice::GaussianMatched: return gaussian_matched(cal.sigma_delta_sq);
    case DensityChoice::UniformMatched: return uniform_matched(cal.sigma_delta_sq);
    case DensityChoice::LaplaceMatched: return laplace_matched(cal.sigma_delta_sq);
    case DensityChoice::Explicit: break;
  }
  throw Error(ErrorCode::InvalidInput, "estimator: unknown density choice");
}

std::vector<std::size_t> decile_ranks(std::size_t successful)
{
  std::vector<std::size_t> out;
  for (std::size_t d : {1u, 5u, 9u}) {
    const std::size_t rank = (d * successful + 9) / 10;
    out.push_back(std::max<std::size_t>(rank, 1));
  }
  return out;
}

namespace {

struct ReplicateResult {
  bool ok = false;
  std::string failure;
  double ise = kNaN;
  std::size_t excluded = 0;
  std::vector<double> values;
  std::vector<double> point_estimates; // NaN where undefined
  std::vector<int> covered;            // -1: no interval
};

} // namespace

StudyReport run_replications(const ScenarioConfig& scenario,
                             const EstimatorSpec& spec,
                             std::size_t replications,
                             const EvalGrid& grid,
                             std::uint64_t master_seed,
                             unsigned threads)
{
  validate(scenario);
  if (replications == 0)
    throw Error(ErrorCode::InvalidInput, "study needs at least one replication");
  if (!(spec.alpha > 0.0 && spec.alpha < 1.0))
    throw Error(ErrorCode::InvalidInput, "study: alpha must lie in (0, 1)");

  std::optional<ErrorDensity> density;
  if (spec.kind == EstimatorKind::KnownError)
    density = working_density(spec, scenario);

  std::vector<double> truth(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) {
    try {
      truth[j] = oracle_m(scenario, grid[j]);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateDenominator)
        throw;
      truth[j] = kNaN;
    }
  }
  std::vector<double> point_truth(spec.points.size());
  for (std::size_t p = 0; p < spec.points.size(); ++p)
    point_truth[p] = oracle_m(scenario, spec.points[p]);

  std::vector<ReplicateResult> results(replications);
  parallel_for(replications, threads, [&](std::size_t r) {
    ReplicateResult& out = results[r];
    ScenarioConfig local = scenario;
    local.seed = derive_seed(master_seed, r);
    try {
      const auto data = generate(local);
      RegressionCurve curve{grid, {}, {}};
      std::optional<double> bandwidth;
      if (spec.kind == EstimatorKind::KnownError) {
        const TrainingSample sample(data.w, data.y);
        curve = estimate_m(sample, *density, grid);
        for (std::size_t p = 0; p < spec.points.size(); ++p) {
          const auto m = estimate_m_at(sample, *density, spec.points[p]);
          out.point_estimates.push_back(m ? *m : kNaN);
          if (m) {
            const auto ci = pointwise_ci(sample, *density, spec.points[p], spec.alpha);
            out.covered.push_back(ci.lower <= point_truth[p] && point_truth[p] <= ci.upper);
          } else {
            out.covered.push_back(-1);
          }
        }
      } else {
        const TrainingSample sample(data.x, data.y);
        bandwidth = cv_bandwidth(sample, spec.nw).bandwidth;
        curve = nw_curve(sample, *bandwidth, grid);
        for (std::size_t p = 0; p < spec.points.size(); ++p) {
          double m = kNaN;
          try {
            m = nw_estimate(sample, *bandwidth, spec.points[p]);
          } catch (const Error& e) {
            if (e.code() != ErrorCode::DegenerateDenominator)
              throw;
          }
          out.point_estimates.push_back(m);
          out.covered.push_back(-1);
        }
      }
      const auto e = ise(curve, truth);
      out.ise = e.value;
      out.excluded = e.excluded_intervals;
      out.values = std::move(curve.values);
      out.ok = true;
    } catch (const Error& e) {
      out.failure = to_string(e.code());
    }
  });

  StudyReport report;
  report.scenario = scenario;
  report.estimator = spec.label();
  report.replications = replications;
  report.master_seed = master_seed;
  report.grid.assign(grid.points().begin(), grid.points().end());
  report.truth = truth;
  report.ise.resize(replications, kNaN);

  std::vector<std::size_t> order;
  for (std::size_t r = 0; r < replications; ++r) {
    if (results[r].ok) {
      report.ise[r] = results[r].ise;
      report.excluded_intervals += results[r].excluded;
      order.push_back(r);
    } else {
      ++report.failures;
      ++report.failure_codes[results[r].failure];
    }
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](auto a, auto b) { return report.ise[a] < report.ise[b]; });

  if (!order.empty()) {
    const std::size_t k = order.size();
    report.median_ise = k % 2 == 1 ? report.ise[order[k / 2]]
                                   : 0.5 * (report.ise[order[k / 2 - 1]] + report.ise[order[k / 2]]);
    const auto ranks = decile_ranks(k);
    const int deciles[] = {1, 5, 9};
    for (std::size_t d = 0; d < ranks.size(); ++d) {
      const std::size_t rep = order[ranks[d] - 1];
      report.deciles.push_back({deciles[d], ranks[d], rep, report.ise[rep], results[rep].values});
    }
  }

  for (std::size_t p = 0; p < spec.points.size(); ++p) {
    PointSummary s;
    s.x = spec.points[p];
    s.truth = point_truth[p];
    CompensatedSum sq, err;
    for (std::size_t r : order) {
      const double m = results[r].point_estimates[p];
      if (std::isfinite(m)) {
        ++s.estimates;
        sq += (m - s.truth) * (m - s.truth);
        err += m - s.truth;
      }
      if (results[r].covered[p] >= 0) {
        ++s.ci_trials;
        s.ci_covered += static_cast<std::size_t>(results[r].covered[p]);
      }
    }
    if (s.estimates > 0) {
      s.rmse = std::sqrt(sq.value() / static_cast<double>(s.estimates));
      s.bias = err.value() / static_cast<double>(s.estimates);
    }
    report.points.push_back(s);
  }
  return report;
}

} // namespace coarse
