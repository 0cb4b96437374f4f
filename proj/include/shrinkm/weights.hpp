#ifndef SHRINKM_WEIGHTS_HPP
#define SHRINKM_WEIGHTS_HPP

// Weight functions u(t) for M-estimation of scatter and psi(t) = t u(t).
//
// A WeightSpec is bound to the ambient dimension p when it is built, so the
// Huber threshold c^2, its consistency constant b, and the t numerator p + nu
// are computed exactly once.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "shrinkm/errors.hpp"
#include "shrinkm/specialfn.hpp"

namespace shrinkm {

enum class WeightKind { Gaussian, Huber, TMle };

/// Which tail a Huber tuning probability q refers to: Lower gives
/// c^2 = F^{-1}_{chi2_p}(q), Upper gives the q-th upper quantile F^{-1}(1 - q).
enum class HuberTail { Lower, Upper };

/// CDF level at which to take the chi-squared quantile for c^2.
inline double huber_level(double q, HuberTail tail) {
  if (!(q > 0.0 && q < 1.0)) throw DomainError("huber: q must lie in (0, 1)");
  return tail == HuberTail::Lower ? q : 1.0 - q;
}

/// c^2 = F^{-1}_{chi2_p}(q).
inline double huber_c_squared(int p, double q) {
  if (p < 1) throw DomainError("huber_c_squared: p must be >= 1");
  return specialfn::chi2_quantile(p, q);
}

/// Fisher-consistency scaling b = F_{p+2}(c^2) + c^2 (1 - F_p(c^2)) / p, which
/// equals E[min(t, c^2)] / p for t ~ chi2_p.
inline double huber_b(int p, double c_squared) {
  if (p < 1) throw DomainError("huber_b: p must be >= 1");
  if (!(c_squared > 0.0)) throw DomainError("huber_b: c^2 must be positive");
  if (std::isinf(c_squared)) return 1.0;
  return specialfn::ChiSquared(p + 2).cdf(c_squared) +
         c_squared * specialfn::ChiSquared(p).sf(c_squared) / p;
}

class WeightSpec {
 public:
  static WeightSpec gaussian(int p) { return WeightSpec(WeightKind::Gaussian, p); }

  /// Huber weight with c^2 = F^{-1}_{chi2_p}(q).
  static WeightSpec huber(int p, double q) {
    WeightSpec w(WeightKind::Huber, p);
    w.q_ = q;
    w.c_squared_ = huber_c_squared(p, q);
    w.b_ = huber_b(p, w.c_squared_);
    return w;
  }

  static WeightSpec huber(int p, double q, HuberTail tail) { return huber(p, huber_level(q, tail)); }

  static WeightSpec t_mle(int p, double dof) {
    if (!(dof > 0.0)) throw DomainError("t weight: dof must be positive");
    WeightSpec w(WeightKind::TMle, p);
    w.dof_ = dof;
    return w;
  }

  /// t weight whose dof is estimated from the data by the M-estimator.
  static WeightSpec t_mle_adaptive(int p) { return WeightSpec(WeightKind::TMle, p); }

  WeightKind kind() const noexcept { return kind_; }
  int dim() const noexcept { return p_; }
  bool resolved() const noexcept { return kind_ != WeightKind::TMle || dof_.has_value(); }

  /// CDF level of the chi-squared quantile defining c^2.
  double q() const {
    require(WeightKind::Huber);
    return q_;
  }
  double c_squared() const {
    require(WeightKind::Huber);
    return c_squared_;
  }
  double b() const {
    require(WeightKind::Huber);
    return b_;
  }
  double dof() const {
    require(WeightKind::TMle);
    if (!dof_) throw std::logic_error("t weight: dof not resolved");
    return *dof_;
  }

  /// Copy of an adaptive t weight with its dof fixed.
  WeightSpec with_dof(double dof) const {
    require(WeightKind::TMle);
    return t_mle(p_, dof);
  }

  double u(double t) const {
    switch (kind_) {
      case WeightKind::Gaussian:
        return 1.0;
      case WeightKind::Huber:
        // 1/b on [0, c^2], c^2/(b t) beyond; u(0) = 1/b is the continuous value.
        return t <= c_squared_ ? 1.0 / b_ : c_squared_ / (b_ * t);
      case WeightKind::TMle:
        return (p_ + dof()) / (dof() + t);
    }
    return 1.0;
  }

  double psi(double t) const {
    switch (kind_) {
      case WeightKind::Gaussian:
        return t;
      case WeightKind::Huber:
        return std::min(t, c_squared_) / b_;
      case WeightKind::TMle:
        return (p_ + dof()) * t / (dof() + t);
    }
    return t;
  }

  /// Points where psi is not smooth; quadrature splits its range there.
  std::optional<double> kink() const {
    if (kind_ == WeightKind::Huber) return c_squared_;
    return std::nullopt;
  }

  std::string name() const {
    switch (kind_) {
      case WeightKind::Gaussian:
        return "gaussian";
      case WeightKind::Huber:
        return "huber(q=" + std::to_string(q_) + ")";
      case WeightKind::TMle:
        return dof_ ? "t(nu=" + std::to_string(*dof_) + ")" : "t(nu=adaptive)";
    }
    return "?";
  }

 private:
  WeightSpec(WeightKind kind, int p) : kind_(kind), p_(p) {
    if (p < 1) throw DomainError("WeightSpec: dimension must be >= 1");
  }

  void require(WeightKind k) const {
    if (kind_ != k) throw std::logic_error("WeightSpec: constant not defined for " + name());
  }

  WeightKind kind_;
  int p_;
  double q_ = 0.0;
  double c_squared_ = 0.0;
  double b_ = 1.0;
  std::optional<double> dof_;
};

inline double weight_u(const WeightSpec& w, double t) { return w.u(t); }
inline double psi(const WeightSpec& w, double t) { return w.psi(t); }

}  // namespace shrinkm

#endif  // SHRINKM_WEIGHTS_HPP
