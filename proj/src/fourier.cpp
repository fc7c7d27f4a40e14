#include "coarsereg/fourier.hpp"

#include "coarsereg/errors.hpp"
#include "coarsereg/known_error.hpp"
#include "coarsereg/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace coarse {

double TGrid::t(std::size_t k) const
{
  const auto offset = static_cast<double>(k) - static_cast<double>(half_count);
  return offset * spacing();
}

TGrid TGrid::covering(double limit, double max_spacing)
{
  if (!(limit > 0.0) || !(max_spacing > 0.0))
    throw Error(ErrorCode::InvalidInput, "t-grid needs positive limit and spacing");
  const auto k = static_cast<std::size_t>(std::ceil(limit / max_spacing - 1e-9));
  return {limit, std::max<std::size_t>(k, 1)};
}

CfTable::CfTable(TGrid grid, std::vector<std::complex<double>> values)
  : grid_(grid), values_(std::move(values))
{
  if (values_.size() != grid_.size())
    throw Error(ErrorCode::InvalidInput, "cf table: values do not match the t-grid");
}

std::complex<double> CfTable::at(double t) const
{
  const double h = grid_.spacing();
  const double pos = t / h + static_cast<double>(grid_.half_count);
  const double idx = std::round(pos);
  if (std::abs(pos - idx) > 1e-6 || idx < 0.0 || idx >= static_cast<double>(grid_.size()))
    throw Error(ErrorCode::InvalidInput, "cf table: t=" + std::to_string(t) + " is not a table node");
  return values_[static_cast<std::size_t>(idx)];
}

double error_cf_at(std::span<const double> pair_differences, double t)
{
  if (t == 0.0 || pair_differences.empty())
    return 1.0;
  CompensatedSum re, im;
  for (double d : pair_differences) {
    re += std::cos(t * d);
    im += std::sin(t * d);
  }
  const double m = static_cast<double>(pair_differences.size());
  const double modulus = std::hypot(re.value(), im.value()) / m;
  return std::min(1.0, std::sqrt(modulus));
}

CfTable estimate_error_cf(const ReplicatedSample& replicates, const TGrid& tgrid, unsigned threads)
{
  const auto diffs = replicates.pair_differences();
  const std::size_t half = tgrid.half_count;
  std::vector<std::complex<double>> values(tgrid.size());
  // The modulus is unchanged under t -> -t, so mirror for exact evenness.
  parallel_for(half + 1, threads, [&](std::size_t k) {
    const double v = error_cf_at(diffs, tgrid.t(half + k));
    values[half + k] = v;
    values[half - k] = v;
  });
  return CfTable(tgrid, std::move(values));
}

EmpiricalCf empirical_cf(const TrainingSample& sample, const TGrid& tgrid)
{
  const auto w = sample.w();
  const auto y = sample.y();
  const double n = static_cast<double>(sample.size());
  const std::size_t half = tgrid.half_count;
  std::vector<std::complex<double>> dens(tgrid.size()), weighted(tgrid.size());
  for (std::size_t k = 0; k <= half; ++k) {
    const double t = tgrid.t(half + k);
    CompensatedSum dr, di, wr, wi;
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double c = std::cos(t * w[j]);
      const double s = std::sin(t * w[j]);
      dr += c;
      di += s;
      wr += y[j] * c;
      wi += y[j] * s;
    }
    const std::complex<double> dv(dr.value() / n, di.value() / n);
    const std::complex<double> wv(wr.value() / n, wi.value() / n);
    dens[half + k] = dv;
    weighted[half + k] = wv;
    dens[half - k] = std::conj(dv);
    weighted[half - k] = std::conj(wv);
  }
  return {CfTable(tgrid, std::move(dens)), CfTable(tgrid, std::move(weighted))};
}

TauSelection select_tau(const std::function<double(double)>& cf_hat,
                        std::size_t group_count,
                        std::size_t n,
                        const TauHints& hints)
{
  TauSelection out;
  if (hints.tau) {
    if (!(*hints.tau >= 0.0))
      throw Error(ErrorCode::InvalidInput, "tau override must be nonnegative");
    out.tau = *hints.tau;
    out.overridden = true;
    return out;
  }
  if (!hints.lambda || !hints.lambda_delta)
    throw Error(ErrorCode::MissingExponents,
                "tau selection needs both lambda and lambda_delta (or an explicit tau)");
  const double lambda = *hints.lambda;
  const double lambda_delta = *hints.lambda_delta;
  if (!(lambda > 0.0) || !(lambda_delta > 0.0) || !(lambda + lambda_delta > 1.0))
    throw Error(ErrorCode::InvalidInput, "lambda and lambda_delta must be positive with sum > 1");
  if (group_count < 2)
    throw Error(ErrorCode::InvalidInput, "tau selection needs at least 2 replicate groups");

  const double big_n = static_cast<double>(group_count);
  const double small_n = static_cast<double>(std::max<std::size_t>(n, 1));
  out.cap = hints.cap ? *hints.cap
                      : std::pow(big_n, 1.0 / (2.0 * (1.0 + lambda_delta))) /
                          std::log(std::max(big_n, 3.0));
  out.guard = std::pow(small_n, 1.0 / (2.0 * (lambda + lambda_delta - 1.0))) /
              std::log(std::max(small_n, 3.0));
  if (!(out.cap > 0.0))
    throw Error(ErrorCode::InvalidInput, "tau cap must be positive");

  const double floor = std::pow(big_n, -hints.floor_exponent);
  const std::size_t probes = std::max<std::size_t>(hints.probe_points, 2);
  double prev = 0.0;
  for (std::size_t k = 1; k <= probes; ++k) {
    const double t = out.cap * static_cast<double>(k) / static_cast<double>(probes);
    if (cf_hat(t) <= floor) {
      double lo = prev, hi = t;
      while (hi - lo > 1e-12 * std::max(1.0, out.cap)) {
        const double mid = 0.5 * (lo + hi);
        (cf_hat(mid) <= floor ? hi : lo) = mid;
      }
      out.floor_crossing = hi;
      break;
    }
    prev = t;
  }

  const double candidate = out.floor_crossing ? std::min(out.cap, *out.floor_crossing) : out.cap;
  if (out.guard < out.cap) {
    out.tau = std::max(out.guard, candidate);
  } else {
    out.tau = out.cap;
    out.guard_exceeds_cap = true;
  }
  return out;
}

TauSelection select_tau(const ReplicatedSample& replicates, std::size_t n, const TauHints& hints)
{
  const auto diffs = replicates.pair_differences();
  return select_tau([&](double t) { return error_cf_at(diffs, t); }, replicates.group_count(), n,
                    hints);
}

double default_t_spacing(const EvalGrid& grid, double tau)
{
  const double reach = std::max(std::abs(grid.lo()), std::abs(grid.hi()));
  double s = reach > 0.0 ? std::numbers::pi / (8.0 * reach) : tau;
  s = std::max(s, 1e-3);
  return std::min(s, tau / static_cast<double>(kMinFrequencyNodes));
}

void validate(const FourierConfig& config)
{
  if (!(config.tau > 0.0) || !std::isfinite(config.tau))
    throw Error(ErrorCode::InvalidInput, "tau must be positive and finite");
  if (!(config.t_spacing > 0.0))
    throw Error(ErrorCode::InvalidInput, "t_spacing must be positive");
  if (config.tau / config.t_spacing < static_cast<double>(kMinFrequencyNodes) - 1e-9)
    throw Error(ErrorCode::Resolution,
                "t_spacing too coarse: fewer than " + std::to_string(kMinFrequencyNodes) +
                  " nodes on [0, tau]");
}

std::optional<double> fourier_lambda_delta(const ErrorDensity& density)
{
  if (density.kind() == DensityKind::Uniform)
    throw Error(ErrorCode::InvalidInput,
                "uniform errors have a sign-changing characteristic function; "
                "use the known-density estimator");
  return density.lambda_delta();
}

Inversion invert(const TrainingSample& sample,
                 const CfSource& error_cf,
                 const FourierConfig& config,
                 const EvalGrid& grid)
{
  const std::size_t g = grid.size();
  if (config.tau == 0.0)
    return {std::vector<double>(g, 0.0), std::vector<double>(g, 0.0), 0.0};
  validate(config);

  const TGrid tgrid = TGrid::covering(config.tau, config.t_spacing);
  const auto ecf = empirical_cf(sample, tgrid);

  std::vector<double> cf(tgrid.size());
  for (std::size_t k = 0; k < tgrid.size(); ++k) {
    const double t = tgrid.t(k);
    if (const auto* table = std::get_if<CfTable>(&error_cf))
      cf[k] = table->at(t).real();
    else
      cf[k] = std::get<std::function<double(double)>>(error_cf)(t);
  }

  const double h = tgrid.spacing();
  Inversion out{std::vector<double>(g), std::vector<double>(g), 0.0};
  for (std::size_t j = 0; j < g; ++j) {
    const double x = grid[j];
    CompensatedSum psi_re, psi_im, phi_re, phi_im;
    for (std::size_t k = 0; k < tgrid.size(); ++k) {
      const double wk = (k == 0 || k + 1 == tgrid.size()) ? 0.5 * h : h;
      const double t = tgrid.t(k);
      const std::complex<double> e(std::cos(t * x), -std::sin(t * x));
      const std::complex<double> a = ecf.density[k] * (wk * cf[k]) * e;
      const std::complex<double> b = ecf.weighted[k] * (wk * cf[k]) * e;
      psi_re += a.real();
      psi_im += a.imag();
      phi_re += b.real();
      phi_im += b.imag();
    }
    const double norm = 1.0 / (2.0 * std::numbers::pi);
    out.psi[j] = psi_re.value() * norm;
    out.phi[j] = phi_re.value() * norm;
    const double r_psi = std::abs(psi_im.value() * norm) / (1.0 + std::abs(out.psi[j]));
    const double r_phi = std::abs(phi_im.value() * norm) / (1.0 + std::abs(out.phi[j]));
    out.max_imag_residue = std::max({out.max_imag_residue, r_psi, r_phi});
  }
  if (out.max_imag_residue > 1e-8)
    throw Error(ErrorCode::InvalidInput,
                "Fourier inversion left an imaginary residue; the CF table is not Hermitian");
  return out;
}

RegressionCurve estimate_m_fourier(const TrainingSample& sample,
                                   const ReplicatedSample& replicates,
                                   const FourierConfig& config,
                                   const EvalGrid& grid,
                                   unsigned threads)
{
  validate(config);
  const TGrid tgrid = TGrid::covering(config.tau, config.t_spacing);
  const auto error_cf = estimate_error_cf(replicates, tgrid, threads);
  const auto inv = invert(sample, error_cf, config, grid);

  const std::size_t g = grid.size();
  std::vector<double> values(g, std::numeric_limits<double>::quiet_NaN());
  std::vector<bool> defined(g, false);
  for (std::size_t j = 0; j < g; ++j) {
    if (inv.psi[j] >= kDegeneracyThreshold) {
      values[j] = inv.phi[j] / inv.psi[j];
      defined[j] = true;
    }
  }
  RegressionCurve curve{grid, std::move(values), std::move(defined)};
  curve.label = "m_tilde";
  curve.parameters["tau"] = config.tau;
  curve.parameters["t_spacing"] = tgrid.spacing();
  curve.parameters["n"] = static_cast<double>(sample.size());
  curve.parameters["replicate_groups"] = static_cast<double>(replicates.group_count());
  curve.parameters["replicate_pairs"] = static_cast<double>(replicates.pair_count());
  if (!config.lambda_delta)
    curve.warnings.push_back(
      "error CF decay exponent undeclared: polynomial decay is assumed by the theory, "
      "supersmooth errors are not covered");
  const std::size_t ok = curve.defined_count();
  if (ok == 0)
    throw Error(ErrorCode::AllDegenerate, "Re psi_tilde below threshold at every grid point");
  if (ok < g)
    curve.warnings.push_back(std::to_string(g - ok) +
                             " grid point(s) undefined: Re psi_tilde below threshold");
  return curve;
}

} // namespace coarse
