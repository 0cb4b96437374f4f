#ifndef SHRINKM_MESTIMATOR_HPP
#define SHRINKM_MESTIMATOR_HPP

// Fixed-point M-estimation of scatter and eigenvalue shrinkage toward the
// grand mean.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "shrinkm/errors.hpp"
#include "shrinkm/scatter.hpp"
#include "shrinkm/weights.hpp"

namespace shrinkm {

struct SolveReport {
  int iterations = 0;
  double final_relative_change = 0.0;
  bool converged = false;
};

struct SolverOptions {
  double tol = 1e-7;
  int max_iter = 500;
};

/// Converged M-estimate together with the (resolved) weight that produced it.
struct MEstimate {
  ScatterMatrix matrix;
  SolveReport report;
  WeightSpec weight;
};

namespace detail {

// (1/n) sum_i w_i x_i x_i^T, accumulated in the lower triangle only.
inline Matrix weighted_outer_mean(const DataSample& data, const Vector& w) {
  const Matrix xw = data.rows().array().colwise() * w.array().sqrt();
  Matrix m = Matrix::Zero(data.p(), data.p());
  m.selfadjointView<Eigen::Lower>().rankUpdate(xw.transpose(), 1.0 / data.n());
  return m;
}

}  // namespace detail

/// Sample covariance (1/n) sum x_i x_i^T about the origin.
inline ScatterMatrix scm(const DataSample& data) {
  data.require_n_greater_than_p("scm");
  try {
    return ScatterMatrix(detail::weighted_outer_mean(data, Vector::Ones(data.n())));
  } catch (const SingularMatrixError&) {
    throw SingularMatrixError("scm: sample covariance is singular (degenerate data)");
  }
}

/// Mean over coordinates of the sample excess kurtosis m4/m2^2 - 3, moments
/// taken about the coordinate means.
inline double mean_marginal_excess_kurtosis(const DataSample& data) {
  const Matrix& x = data.rows();
  const Eigen::RowVectorXd mu = x.colwise().mean();
  const Eigen::ArrayXXd c = (x.rowwise() - mu).array();
  const Eigen::ArrayXd m2 = c.square().colwise().mean().transpose();
  const Eigen::ArrayXd m4 = c.square().square().colwise().mean().transpose();
  double total = 0.0;
  int used = 0;
  for (Eigen::Index j = 0; j < m2.size(); ++j) {
    if (m2(j) > 0.0) {
      total += m4(j) / (m2(j) * m2(j)) - 3.0;
      ++used;
    }
  }
  return used > 0 ? total / used : 0.0;
}

inline constexpr double kMinTDof = 2.5;
inline constexpr double kMaxTDof = 1000.0;

/// Degrees of freedom for the t weight by inverting kappa = 2 / (nu - 4):
/// kappa_hat is a third of the mean marginal excess kurtosis, and a
/// nonpositive kappa_hat means Gaussian-like tails (nu at the cap).
inline double estimate_t_dof(const DataSample& data) {
  const double kappa = mean_marginal_excess_kurtosis(data) / 3.0;
  const double nu = kappa > 0.0 ? 2.0 / kappa + 4.0 : kMaxTDof;
  return std::clamp(nu, kMinTDof, kMaxTDof);
}

/// Solves M = (1/n) sum u(x_i^T M^{-1} x_i) x_i x_i^T by fixed-point
/// iteration from the SCM. Stops when the relative Frobenius change drops to
/// tol; on hitting max_iter the last iterate is returned with converged=false.
/// An adaptive t weight has its dof estimated from the data first.
inline MEstimate m_estimate(const DataSample& data, const WeightSpec& weight,
                            const SolverOptions& opts = {}) {
  data.require_n_greater_than_p("m_estimate");
  if (!(opts.tol > 0.0)) throw DomainError("m_estimate: tol must be positive");
  if (opts.max_iter < 1) throw DomainError("m_estimate: max_iter must be >= 1");
  if (weight.dim() != data.p()) throw DomainError("m_estimate: weight dimension does not match data");

  WeightSpec w = weight.resolved() ? weight : weight.with_dof(estimate_t_dof(data));

  std::optional<ScatterMatrix> current;
  try {
    current.emplace(scm(data));
  } catch (const SingularMatrixError&) {
    const double scale = data.rows().squaredNorm() / (double(data.n()) * data.p());
    current.emplace(ScatterMatrix::identity(data.p(), scale > 0.0 ? scale : 1.0));
  }

  SolveReport report;
  Vector u(data.n());
  while (report.iterations < opts.max_iter) {
    const Vector t = current->quad_forms(data);
    for (int i = 0; i < data.n(); ++i) u(i) = w.u(t(i));
    Matrix next = detail::weighted_outer_mean(data, u);
    // Only the lower triangle is filled; compare on the full symmetric form.
    next = next.selfadjointView<Eigen::Lower>();
    const double change = (next - current->matrix()).norm() / current->matrix().norm();
    ++report.iterations;
    try {
      current.emplace(next);
    } catch (const SingularMatrixError&) {
      throw SingularMatrixError(
          "m_estimate: iterate became singular after " + std::to_string(report.iterations) +
          " iterations; the data likely violate the Kent-Tyler existence condition");
    }
    report.final_relative_change = change;
    if (change <= opts.tol) {
      report.converged = true;
      break;
    }
  }
  return MEstimate{std::move(*current), report, w};
}

/// beta M + (1 - beta) (tr(M)/p) I.
inline ScatterMatrix shrink(const ScatterMatrix& m, double beta) {
  if (!(beta >= 0.0 && beta <= 1.0))
    throw DomainError("shrink: beta must lie in [0, 1], got " + std::to_string(beta));
  const int p = m.dim();
  const double eta = m.trace() / p;
  Matrix out = beta * m.matrix();
  out.diagonal().array() += (1.0 - beta) * eta;
  return ScatterMatrix(out);
}

}  // namespace shrinkm

#endif  // SHRINKM_MESTIMATOR_HPP
