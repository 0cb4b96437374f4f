#ifndef SHRINKM_SPECIALFN_HPP
#define SHRINKM_SPECIALFN_HPP

// Regularized incomplete gamma and the chi-squared distribution.
//
// Only what the Huber consistency constants need: P(a, x), the chi-squared
// CDF and its inverse. Everything here is a pure function of its arguments.

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "shrinkm/errors.hpp"

namespace shrinkm::specialfn {

namespace detail {

inline constexpr double kRelEps = 1e-15;
inline constexpr int kMaxTerms = 500;

// Series for P(a, x), valid (and fast) for x < a + 1.
inline double lower_gamma_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  double ap = a;
  for (int k = 0; k < kMaxTerms; ++k) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::abs(term) < std::abs(sum) * kRelEps) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Lentz continued fraction for Q(a, x), used for x >= a + 1.
inline double upper_gamma_cf(double a, double x) {
  constexpr double tiny = std::numeric_limits<double>::min() / kRelEps;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= kMaxTerms; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kRelEps) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace detail

/// Regularized lower incomplete gamma P(a, x) = gamma(a, x) / Gamma(a).
inline double reg_lower_gamma(double a, double x) {
  if (!(a > 0.0) || !std::isfinite(a))
    throw DomainError("reg_lower_gamma: shape a must be positive");
  if (!(x >= 0.0))
    throw DomainError("reg_lower_gamma: x must be nonnegative");
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  if (x < a + 1.0) return detail::lower_gamma_series(a, x);
  return 1.0 - detail::upper_gamma_cf(a, x);
}

/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x), computed without
/// cancellation in the upper tail.
inline double reg_upper_gamma(double a, double x) {
  if (!(a > 0.0) || !std::isfinite(a))
    throw DomainError("reg_upper_gamma: shape a must be positive");
  if (!(x >= 0.0))
    throw DomainError("reg_upper_gamma: x must be nonnegative");
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  if (x < a + 1.0) return 1.0 - detail::lower_gamma_series(a, x);
  return detail::upper_gamma_cf(a, x);
}

/// Chi-squared distribution with integer degrees of freedom.
class ChiSquared {
 public:
  explicit ChiSquared(int dof) : dof_(dof) {
    if (dof < 1) throw DomainError("ChiSquared: dof must be >= 1");
  }

  int dof() const noexcept { return dof_; }
  double mean() const noexcept { return dof_; }

  double pdf(double x) const {
    if (x < 0.0) return 0.0;
    const double k2 = 0.5 * dof_;
    if (x == 0.0) return dof_ == 2 ? 0.5 : (dof_ == 1 ? INFINITY : 0.0);
    return std::exp((k2 - 1.0) * std::log(x) - 0.5 * x - k2 * std::log(2.0) -
                    std::lgamma(k2));
  }

  double cdf(double x) const {
    if (!(x >= 0.0)) throw DomainError("chi2_cdf: x must be nonnegative");
    return reg_lower_gamma(0.5 * dof_, 0.5 * x);
  }

  double sf(double x) const {
    if (!(x >= 0.0)) throw DomainError("chi2_sf: x must be nonnegative");
    return reg_upper_gamma(0.5 * dof_, 0.5 * x);
  }

  // Safeguarded Newton from a Wilson-Hilferty start; every step is kept
  // inside a shrinking bracket so a bad Newton step degrades to bisection.
  double quantile(double q) const {
    if (!(q > 0.0 && q < 1.0))
      throw DomainError("chi2_quantile: q must lie in (0, 1), got " +
                        std::to_string(q));
    const double k = dof_;
    double lo = 0.0;
    double hi = k + 20.0 * std::sqrt(2.0 * k);
    while (cdf(hi) < q) {
      lo = hi;
      hi *= 2.0;
    }

    const double z = normal_quantile(q);
    const double h = 2.0 / (9.0 * k);
    double x = k * std::pow(1.0 - h + z * std::sqrt(h), 3);
    if (!(x > lo && x < hi)) x = 0.5 * (lo + hi);

    for (int it = 0; it < 200; ++it) {
      const double f = cdf(x) - q;
      if (f == 0.0) return x;
      if (f < 0.0)
        lo = x;
      else
        hi = x;
      const double dens = pdf(x);
      double next = (dens > 0.0 && std::isfinite(dens)) ? x - f / dens : lo - 1.0;
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (std::abs(next - x) <= 1e-15 * std::max(1.0, x) ||
          hi - lo <= 1e-15 * std::max(1.0, hi))
        return next;
      x = next;
    }
    return x;
  }

 private:
  // Acklam's rational approximation; only seeds the Newton iteration.
  static double normal_quantile(double q) {
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                   -2.759285104469687e+02, 1.383577518672690e+02,
                                   -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                   -1.556989798598866e+02, 6.680131188771972e+01,
                                   -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                   -2.400758277161838e+00, -2.549732539343734e+00,
                                   4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                   2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double plow = 0.02425;
    if (q < plow) {
      const double r = std::sqrt(-2.0 * std::log(q));
      return (((((c[0] * r + c[1]) * r + c[2]) * r + c[3]) * r + c[4]) * r + c[5]) /
             ((((d[0] * r + d[1]) * r + d[2]) * r + d[3]) * r + 1.0);
    }
    if (q > 1.0 - plow) return -normal_quantile(1.0 - q);
    const double r0 = q - 0.5;
    const double r = r0 * r0;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * r0 /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }

  int dof_;
};

inline double chi2_cdf(int dof, double x) { return ChiSquared(dof).cdf(x); }
inline double chi2_quantile(int dof, double q) { return ChiSquared(dof).quantile(q); }

}  // namespace shrinkm::specialfn

#endif  // SHRINKM_SPECIALFN_HPP
