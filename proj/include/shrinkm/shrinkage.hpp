#ifndef SHRINKM_SHRINKAGE_HPP
#define SHRINKM_SHRINKAGE_HPP

// Shrinkage-parameter formulas and the four estimators built on them.

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "shrinkm/errors.hpp"
#include "shrinkm/mestimator.hpp"
#include "shrinkm/scatter.hpp"
#include "shrinkm/weights.hpp"

namespace shrinkm {

/// MMSE-optimal shrinkage for the 1-step proxy under elliptical sampling:
///
///   beta = (g - 1) / ((g - 1)(1 - 1/n) + psi1 (1 - 1/p)(2g + p) / n)
///
/// with g the sphericity of the M-functional and psi1 = E[psi(r)^2] / (p(p+2)).
/// The result lies in [0, 1).
inline double beta_app(double gamma, double psi1, int n, int p) {
  if (!(gamma >= 1.0)) throw DomainError("beta_app: sphericity must be >= 1");
  if (!(psi1 > 0.0)) throw DomainError("beta_app: psi1 must be positive");
  if (n < 2) throw DomainError("beta_app: n must be >= 2");
  if (p < 2) throw DomainError("beta_app: p must be >= 2");
  const double g1 = gamma - 1.0;
  if (g1 == 0.0) return 0.0;
  const double den = g1 * (1.0 - 1.0 / n) + psi1 * (1.0 - 1.0 / p) * (2.0 * gamma + p) / n;
  return std::clamp(g1 / den, 0.0, std::nextafter(1.0, 0.0));
}

/// Optimal shrinkage of the sample covariance in terms of elliptical kurtosis:
/// beta = (g - 1) / (g - 1 + a), a = [kappa (2g(1 - 1/p) + p - 1) + g(1 - 2/p) + p] / n.
inline double beta_gauss(double gamma, double kappa, int n, int p) {
  if (!(gamma >= 1.0)) throw DomainError("beta_gauss: sphericity must be >= 1");
  if (p < 3) throw DomainError("beta_gauss: p must be >= 3");
  if (n < 2) throw DomainError("beta_gauss: n must be >= 2");
  if (!(kappa > -2.0 / (p + 2))) throw DomainError("beta_gauss: kappa must exceed -2/(p+2)");
  const double g1 = gamma - 1.0;
  if (g1 == 0.0) return 0.0;
  const double a = kappa * (2.0 * gamma * (1.0 - 1.0 / p) + p - 1.0) / n +
                   (gamma * (1.0 - 2.0 / p) + p) / n;
  return std::clamp(g1 / (g1 + a), 0.0, std::nextafter(1.0, 0.0));
}

/// psi1_hat = (1/n) sum_i psi(t_i)^2 / (p(p+2)), t_i = x_i^T M^{-1} x_i.
inline double psi1_hat(const DataSample& data, const ScatterMatrix& m, const WeightSpec& w) {
  if (!w.resolved()) throw std::logic_error("psi1_hat: weight must be resolved");
  const Vector t = m.quad_forms(data);
  const double p = data.p();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    const double s = w.psi(t(i));
    acc += s * s;
  }
  return acc / (double(data.n()) * p * (p + 2.0));
}

/// Sphericity estimate from the spatial sign covariance
/// SGN = (1/n) sum s_i s_i^T, s_i = x_i / |x_i|:
/// gamma_hat = n/(n-1) (p tr(SGN^2) - p/n), clipped to [1, p].
inline double sphericity_hat(const DataSample& data) {
  const int n = data.n();
  const int p = data.p();
  if (n < 2) throw DomainError("sphericity_hat: need n >= 2");
  const Vector norms = data.rows().rowwise().norm();
  if ((norms.array() == 0.0).any()) throw DataError("sphericity_hat: zero observation vector");
  const Matrix signs = data.rows().array().colwise() / norms.array();
  Matrix sgn = Matrix::Zero(p, p);
  sgn.selfadjointView<Eigen::Lower>().rankUpdate(signs.transpose(), 1.0 / n);
  sgn = sgn.selfadjointView<Eigen::Lower>();
  const double raw = double(n) / (n - 1) * (p * sgn.squaredNorm() - double(p) / n);
  return std::clamp(raw, 1.0, double(p));
}

/// Elliptical kurtosis from marginal excess kurtoses (each equals 3 kappa
/// for an elliptical law), floored just above the lower bound -2/(p+2).
inline double kappa_hat(const DataSample& data) {
  if (data.n() < 4) throw DomainError("kappa_hat: need n >= 4");
  const double floor = -2.0 / (data.p() + 2) + 1e-3;
  return std::max(mean_marginal_excess_kurtosis(data) / 3.0, floor);
}

/// Ledoit-Wolf shrinkage toward the scaled identity, written as the weight
/// beta on S: beta = 1 - min(d^2, bbar^2) / d^2 with d^2 = |S - mI|_F^2 and
/// bbar^2 = (1/n^2) sum |x_i x_i^T - S|_F^2. Returns 0 when S is spherical.
inline double lw_beta(const DataSample& data) {
  const int n = data.n();
  const int p = data.p();
  if (n < 2) throw DomainError("lw_beta: need n >= 2");
  const Matrix& x = data.rows();
  const Matrix s = (x.transpose() * x) / n;
  const double m = s.trace() / p;
  Matrix centered = s;
  centered.diagonal().array() -= m;
  const double d2 = centered.squaredNorm();
  if (!(d2 > 0.0)) return 0.0;
  // |x x^T - S|^2 = |x|^4 - 2 x^T S x + |S|^2
  const Vector sq = x.rowwise().squaredNorm();
  const Vector xsx = ((x * s).array() * x.array()).rowwise().sum();
  const double s2 = s.squaredNorm();
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += sq(i) * sq(i) - 2.0 * xsx(i) + s2;
  const double b2 = std::min(d2, acc / (double(n) * n));
  return std::clamp(1.0 - b2 / d2, 0.0, 1.0);
}

enum class Method { Gauss, LW, Huber, TMle };

inline std::string_view method_name(Method m) {
  switch (m) {
    case Method::Gauss:
      return "gauss";
    case Method::LW:
      return "lw";
    case Method::Huber:
      return "huber";
    case Method::TMle:
      return "tmle";
  }
  return "?";
}

inline Method parse_method(std::string_view s) {
  if (s == "gauss") return Method::Gauss;
  if (s == "lw") return Method::LW;
  if (s == "huber") return Method::Huber;
  if (s == "tmle" || s == "t-mle" || s == "t") return Method::TMle;
  throw std::invalid_argument("unknown estimator '" + std::string(s) +
                              "' (expected one of: gauss, lw, huber, tmle)");
}

struct EstimateOptions {
  double huber_q = 0.7;
  HuberTail huber_tail = HuberTail::Upper;
  /// Fixed dof for the t weight; estimated from the data when empty.
  std::optional<double> t_dof;
  SolverOptions solver;
};

struct Diagnostics {
  double gamma_hat = 1.0;
  std::optional<double> psi1_hat;
  std::optional<double> kappa_hat;
  std::optional<double> nu_hat;
  SolveReport solve_report;
};

struct ShrinkageEstimate {
  ScatterMatrix matrix;
  double beta;
  Method method;
  Diagnostics diagnostics;
};

/// Shrinkage estimate of scatter by one of the four methods:
///   gauss  SCM with beta_gauss(gamma_hat, kappa_hat)
///   lw     SCM with lw_beta
///   huber  Huber M-estimate with beta_app(gamma_hat, psi1_hat)
///   tmle   t M-estimate (dof estimated unless given) with beta_app(gamma_hat, psi1_hat)
inline ShrinkageEstimate estimate(const DataSample& data, Method method,
                                  const EstimateOptions& opts = {}) {
  data.require_n_greater_than_p("estimate");
  const int n = data.n();
  const int p = data.p();
  Diagnostics diag;
  diag.gamma_hat = sphericity_hat(data);

  switch (method) {
    case Method::Gauss: {
      ScatterMatrix s = scm(data);
      diag.kappa_hat = kappa_hat(data);
      diag.solve_report = {1, 0.0, true};
      const double beta = beta_gauss(diag.gamma_hat, *diag.kappa_hat, n, p);
      return {shrink(s, beta), beta, method, diag};
    }
    case Method::LW: {
      ScatterMatrix s = scm(data);
      diag.solve_report = {1, 0.0, true};
      const double beta = lw_beta(data);
      return {shrink(s, beta), beta, method, diag};
    }
    case Method::Huber:
    case Method::TMle: {
      WeightSpec w = method == Method::Huber
                         ? WeightSpec::huber(p, opts.huber_q, opts.huber_tail)
                         : (opts.t_dof ? WeightSpec::t_mle(p, *opts.t_dof) : WeightSpec::t_mle_adaptive(p));
      MEstimate est = m_estimate(data, w, opts.solver);
      if (method == Method::TMle) diag.nu_hat = est.weight.dof();
      diag.psi1_hat = psi1_hat(data, est.matrix, est.weight);
      diag.solve_report = est.report;
      const double beta = beta_app(diag.gamma_hat, *diag.psi1_hat, n, p);
      return {shrink(est.matrix, beta), beta, method, diag};
    }
  }
  throw std::logic_error("estimate: unhandled method");
}

}  // namespace shrinkm

#endif  // SHRINKM_SHRINKAGE_HPP
