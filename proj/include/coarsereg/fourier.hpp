#pragma once

#include "coarsereg/data_model.hpp"

#include <complex>
#include <cstddef>
#include <functional>
#include <optional>
#include <variant>
#include <vector>

namespace coarse {

//! Symmetric uniform frequency grid t_k = k * limit / half_count,
//! k = -half_count..half_count.
struct TGrid {
  double limit = 0.0;
  std::size_t half_count = 0;

  double spacing() const { return limit / static_cast<double>(half_count); }
  std::size_t size() const { return 2 * half_count + 1; }
  double t(std::size_t k) const;

  //! Finest grid on [-limit, limit] whose spacing does not exceed max_spacing.
  static TGrid covering(double limit, double max_spacing);
};

//! Tabulated characteristic-function estimate on a TGrid.
class CfTable {
public:
  CfTable(TGrid grid, std::vector<std::complex<double>> values);

  const TGrid& grid() const noexcept { return grid_; }
  const std::vector<std::complex<double>>& values() const noexcept { return values_; }
  std::complex<double> operator[](std::size_t k) const { return values_[k]; }
  //! Value at a node of this table; throws InvalidInput off-node.
  std::complex<double> at(double t) const;

private:
  TGrid grid_;
  std::vector<std::complex<double>> values_;
};

//! |M^{-1} sum_j sum_{k1<k2} exp(it(U_jk1 - U_jk2))|^{1/2} at a single t.
double error_cf_at(std::span<const double> pair_differences, double t);

//! Replicate-based estimate of the error characteristic function. Real,
//! in [0, 1], exactly 1 at t = 0 and exactly even.
CfTable estimate_error_cf(const ReplicatedSample& replicates, const TGrid& tgrid, unsigned threads = 1);

struct EmpiricalCf {
  CfTable density;  //!< n^{-1} sum exp(itW_j)
  CfTable weighted; //!< n^{-1} sum Y_j exp(itW_j)
};

//! Hermitian empirical characteristic functions of the training sample.
EmpiricalCf empirical_cf(const TrainingSample& sample, const TGrid& tgrid);

struct TauHints {
  std::optional<double> tau;          //!< explicit override, returned unchanged
  std::optional<double> lambda;       //!< smoothness exponent of f_W and f_W g
  std::optional<double> lambda_delta; //!< decay exponent of the error CF
  std::optional<double> cap;          //!< replaces the rate cap when set
  double floor_exponent = 0.25;       //!< noise floor N^{-floor_exponent}
  std::size_t probe_points = 512;
};

struct TauSelection {
  double tau = 0.0;
  double cap = 0.0;
  double guard = 0.0;
  std::optional<double> floor_crossing;
  bool overridden = false;
  //! Set when the lower-rate guard reaches the cap; the cap is used.
  bool guard_exceeds_cap = false;
};

//! Truncation point: min(rate cap, first t where the CF estimate reaches
//! the noise floor), kept above the lower-rate guard.
TauSelection select_tau(const std::function<double(double)>& cf_hat,
                        std::size_t group_count,
                        std::size_t n,
                        const TauHints& hints);

TauSelection select_tau(const ReplicatedSample& replicates, std::size_t n, const TauHints& hints);

struct FourierConfig {
  double tau = 0.0;
  double t_spacing = 0.0;
  std::optional<double> lambda;
  std::optional<double> lambda_delta;
};

//! Minimum number of positive-frequency nodes on [0, tau].
inline constexpr std::size_t kMinFrequencyNodes = 16;

//! Spacing resolving oscillations up to max|x| on the grid:
//! min(max(pi / (8 max|x|), 1e-3), tau / 16).
double default_t_spacing(const EvalGrid& grid, double tau);

//! Throws InvalidInput / Resolution if the configuration is unusable.
void validate(const FourierConfig& config);

//! The decay exponent usable for tau selection. Throws for Uniform errors,
//! whose characteristic function changes sign.
std::optional<double> fourier_lambda_delta(const ErrorDensity& density);

using CfSource = std::variant<CfTable, std::function<double(double)>>;

struct Inversion {
  std::vector<double> psi;
  std::vector<double> phi;
  double max_imag_residue = 0.0;
};

//! Truncated Fourier inversion by composite trapezoid on the symmetric
//! t-grid. Real parts are returned; imaginary residues above
//! 1e-8 (1 + |real|) are an error.
Inversion invert(const TrainingSample& sample,
                 const CfSource& error_cf,
                 const FourierConfig& config,
                 const EvalGrid& grid);

//! m_tilde = Re phi_tilde / Re psi_tilde with the error CF estimated from
//! the replicates.
RegressionCurve estimate_m_fourier(const TrainingSample& sample,
                                   const ReplicatedSample& replicates,
                                   const FourierConfig& config,
                                   const EvalGrid& grid,
                                   unsigned threads = 1);

} // namespace coarse
