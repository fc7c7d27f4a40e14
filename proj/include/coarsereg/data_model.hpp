#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace coarse {

//! Precisely measured training pairs (W_i, Y_i). Validated on construction.
class TrainingSample {
public:
  TrainingSample(std::vector<double> w, std::vector<double> y);

  std::span<const double> w() const noexcept { return w_; }
  std::span<const double> y() const noexcept { return y_; }
  std::size_t size() const noexcept { return w_.size(); }

private:
  std::vector<double> w_;
  std::vector<double> y_;
};

//! Grouped contaminated replicates U_jk. Every group holds at least two
//! measurements; pair_count() is M = sum_j n_j (n_j - 1) / 2.
class ReplicatedSample {
public:
  explicit ReplicatedSample(std::vector<std::vector<double>> groups);

  const std::vector<std::vector<double>>& groups() const noexcept { return groups_; }
  std::size_t group_count() const noexcept { return groups_.size(); }
  std::size_t pair_count() const noexcept { return pair_count_; }

  //! Within-group differences U_jk1 - U_jk2 for k1 < k2, group-major.
  std::vector<double> pair_differences() const;

private:
  std::vector<std::vector<double>> groups_;
  std::size_t pair_count_ = 0;
};

enum class DensityKind { Gaussian, Laplace, Uniform, Custom };

//! User-supplied error law. `derivative(u, order)` must support orders
//! 1..max_derivative_order; `characteristic` may be empty. `scale` sets the
//! validation window [-50 scale, 50 scale].
struct CustomDensity {
  std::function<double(double)> density;
  std::function<double(double, int)> derivative;
  int max_derivative_order = 0;
  std::function<double(double)> characteristic;
  std::optional<double> lambda_delta;
  double scale = 1.0;
  std::string name = "custom";
};

//! Symmetric contamination density f_delta with optional derivatives and
//! characteristic function, using the convention f^ft(t) = int f(x) e^{itx} dx.
class ErrorDensity {
public:
  static ErrorDensity gaussian(double sigma);
  static ErrorDensity laplace(double scale);
  static ErrorDensity uniform(double half_width);
  static ErrorDensity custom(CustomDensity spec);

  DensityKind kind() const noexcept { return kind_; }
  //! sigma, b or a for the built-in kinds; the declared scale for Custom.
  double scale() const noexcept { return scale_; }
  //! Closed-form variance for built-in kinds.
  std::optional<double> variance() const;
  //! Polynomial decay exponent of the characteristic function, if declared.
  std::optional<double> lambda_delta() const noexcept { return lambda_delta_; }
  bool has_characteristic() const noexcept;
  int max_derivative_order() const noexcept;

  double density(double u) const;
  //! f_delta^{(order)}(u) for order in {0, 1, 2}.
  double derivative(double u, int order) const;
  //! Real-valued characteristic function (symmetry makes it real).
  double characteristic(double t) const;

  //! Round-trippable spec string such as "gaussian:0.144".
  std::string describe() const;

private:
  ErrorDensity(DensityKind kind, double scale, std::optional<double> lambda_delta);

  DensityKind kind_;
  double scale_;
  std::optional<double> lambda_delta_;
  std::optional<CustomDensity> custom_;
};

//! Strictly increasing evaluation locations spanning a compact interval D.
class EvalGrid {
public:
  explicit EvalGrid(std::vector<double> points);
  static EvalGrid uniform(double lo, double hi, std::size_t count);

  std::span<const double> points() const noexcept { return points_; }
  std::size_t size() const noexcept { return points_.size(); }
  double operator[](std::size_t i) const { return points_[i]; }
  double lo() const noexcept { return points_.front(); }
  double hi() const noexcept { return points_.back(); }

private:
  std::vector<double> points_;
};

//! Values aligned with a grid. Undefined points (degenerate denominator)
//! carry NaN and defined[i] == false.
struct RegressionCurve {
  RegressionCurve(EvalGrid g, std::vector<double> v, std::vector<bool> d)
    : grid(std::move(g)), values(std::move(v)), defined(std::move(d)) {}

  EvalGrid grid;
  std::vector<double> values;
  std::vector<bool> defined;
  std::optional<std::vector<double>> variance;
  std::optional<std::vector<double>> band_lower;
  std::optional<std::vector<double>> band_upper;
  std::string label;
  std::map<std::string, double> parameters;
  std::vector<std::string> warnings;

  std::size_t defined_count() const;
  //! Throws InvalidInput if lengths disagree or bands do not bracket values.
  void check_invariants() const;
};

} // namespace coarse
