#ifndef SHRINKM_SCATTER_HPP
#define SHRINKM_SCATTER_HPP

// Core value types: an observation matrix and a symmetric positive-definite
// scatter matrix with a cached Cholesky factor.

#include <cmath>
#include <string>
#include <utility>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "shrinkm/errors.hpp"

namespace shrinkm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// n observations of a p-vector, one per row. Observations are taken to be
/// centered already; nothing here subtracts a mean.
class DataSample {
 public:
  explicit DataSample(Matrix rows) : rows_(std::move(rows)) {
    if (rows_.rows() < 1 || rows_.cols() < 1)
      throw DataError("data sample must have at least one row and one column");
    if (!rows_.allFinite()) throw DataError("data sample contains non-finite entries");
  }

  int n() const noexcept { return static_cast<int>(rows_.rows()); }
  int p() const noexcept { return static_cast<int>(rows_.cols()); }
  const Matrix& rows() const noexcept { return rows_; }
  auto row(int i) const { return rows_.row(i); }

  /// Throws DataError unless n > p, which every scatter estimator here needs.
  void require_n_greater_than_p(const char* context) const {
    if (n() <= p())
      throw DataError(std::string(context) + ": need more observations than dimensions (n > p), got n=" +
                      std::to_string(n()) + ", p=" + std::to_string(p()));
  }

 private:
  Matrix rows_;
};

/// Symmetric positive-definite p x p matrix. The upper triangle is rebuilt
/// from the lower one so the stored matrix is exactly symmetric.
class ScatterMatrix {
 public:
  explicit ScatterMatrix(const Matrix& m) {
    if (m.rows() != m.cols() || m.rows() < 1)
      throw DomainError("ScatterMatrix: matrix must be square and nonempty");
    if (!m.allFinite()) throw SingularMatrixError("ScatterMatrix: non-finite entries");
    m_ = m.selfadjointView<Eigen::Lower>();
    llt_.compute(m_);
    if (llt_.info() != Eigen::Success)
      throw SingularMatrixError("ScatterMatrix: matrix is not positive definite");
    // Pivots at rounding level relative to the largest diagonal entry mean
    // the matrix is numerically singular even if LLT did not break down.
    const auto& l = llt_.matrixLLT();
    const double floor = 1e-14 * m_.rows() * m_.diagonal().cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < l.rows(); ++i)
      if (!(l(i, i) * l(i, i) > floor) || !std::isfinite(l(i, i)))
        throw SingularMatrixError("ScatterMatrix: matrix is not positive definite");
  }

  static ScatterMatrix identity(int p, double scale = 1.0) {
    return ScatterMatrix(scale * Matrix::Identity(p, p));
  }

  int dim() const noexcept { return static_cast<int>(m_.rows()); }
  const Matrix& matrix() const noexcept { return m_; }
  double operator()(int i, int j) const { return m_(i, j); }

  double trace() const { return m_.trace(); }
  double frobenius_norm_squared() const { return m_.squaredNorm(); }

  /// Sphericity p tr(M^2) / tr(M)^2, in [1, p].
  double sphericity() const {
    const double tr = trace();
    return dim() * m_.squaredNorm() / (tr * tr);
  }

  /// Lower Cholesky factor L with M = L L^T.
  Matrix cholesky_factor() const { return llt_.matrixL(); }

  /// x^T M^{-1} x by a triangular solve against the cached factor.
  double quad_form(const Eigen::Ref<const Vector>& x) const {
    return llt_.matrixL().solve(x).squaredNorm();
  }

  /// x_i^T M^{-1} x_i for every row of data.
  Vector quad_forms(const DataSample& data) const {
    if (data.p() != dim()) throw DomainError("quad_forms: dimension mismatch");
    const Matrix z = llt_.matrixL().solve(data.rows().transpose());
    return z.colwise().squaredNorm().transpose();
  }

  ScatterMatrix scaled(double a) const {
    if (!(a > 0.0)) throw DomainError("ScatterMatrix::scaled: factor must be positive");
    return ScatterMatrix(a * m_);
  }

 private:
  Matrix m_;
  Eigen::LLT<Matrix> llt_;
};

/// Sphericity of any symmetric matrix with positive trace.
inline double sphericity(const Matrix& m) {
  const double tr = m.trace();
  return static_cast<double>(m.rows()) * m.squaredNorm() / (tr * tr);
}

}  // namespace shrinkm

#endif  // SHRINKM_SCATTER_HPP
