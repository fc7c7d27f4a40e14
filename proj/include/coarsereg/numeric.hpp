#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>

namespace coarse {

//! Neumaier-compensated running sum. Results do not depend on how the
//! caller batches additions, only on their order.
class CompensatedSum {
public:
  void add(double value) noexcept
  {
    const double t = sum_ + value;
    if (std::abs(sum_) >= std::abs(value))
      compensation_ += (sum_ - t) + value;
    else
      compensation_ += (value - t) + sum_;
    sum_ = t;
  }

  CompensatedSum& operator+=(double value) noexcept
  {
    add(value);
    return *this;
  }

  double value() const noexcept { return sum_ + compensation_; }

private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

double normal_pdf(double z) noexcept;
double normal_cdf(double z) noexcept;

//! Inverse standard normal CDF. Acklam's rational approximation followed by
//! one Halley step against erfc; absolute error well below 1e-12 on (0, 1).
double normal_quantile(double p);

//! Adaptive Simpson quadrature of f over [a, b] to absolute tolerance `tol`.
double adaptive_simpson(const std::function<double(double)>& f,
                        double a,
                        double b,
                        double tol,
                        int max_depth = 50);

//! Composite trapezoid rule over tabulated (x, y).
double trapezoid(std::span<const double> x, std::span<const double> y);

//! Golden-section search for the maximiser of f on [lo, hi] (f assumed
//! unimodal there). Returns the abscissa.
double golden_section_max(const std::function<double(double)>& f,
                          double lo,
                          double hi,
                          double tol);

//! Bisection for a sign change of f on [lo, hi]; requires f(lo)*f(hi) < 0.
double bisect_root(const std::function<double(double)>& f,
                   double lo,
                   double hi,
                   double tol);

//! Counter-based seed derivation: independent stream seeds from
//! (master, index) without consuming a shared generator.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept;

//! Worker count from COARSEREG_THREADS, falling back to 1.
unsigned default_thread_count();

//! Runs body(i) for i in [0, count) on up to `threads` workers. Each index
//! is visited exactly once; callers write to disjoint slots.
void parallel_for(std::size_t count,
                  unsigned threads,
                  const std::function<void(std::size_t)>& body);

} // namespace coarse
