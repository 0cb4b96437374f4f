#ifndef SHRINKM_ELLIPTICAL_HPP
#define SHRINKM_ELLIPTICAL_HPP

// Population side of the elliptical model: AR(1) scatter, MVN and t samplers
// (t is parametrized by its covariance), the scale sigma of the M-functional,
// the population psi1 constant, and the 1-step estimator C used as an oracle
// in tests and the simulation harness.

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <utility>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/tools/roots.hpp>

#include "shrinkm/errors.hpp"
#include "shrinkm/mestimator.hpp"
#include "shrinkm/scatter.hpp"
#include "shrinkm/weights.hpp"

namespace shrinkm {

/// Toeplitz scatter (M)_ij = eta rho^|i-j|; trace p eta.
inline ScatterMatrix ar1_scatter(int p, double rho, double eta) {
  if (p < 1) throw DomainError("ar1_scatter: p must be >= 1");
  if (!(rho >= 0.0 && rho < 1.0)) throw DomainError("ar1_scatter: rho must lie in [0, 1)");
  if (!(eta > 0.0)) throw DomainError("ar1_scatter: eta must be positive");
  Matrix m(p, p);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j) m(i, j) = eta * std::pow(rho, std::abs(i - j));
  return ScatterMatrix(m);
}

/// Closed-form sphericity of the AR(1) scatter,
/// [p + 2 sum_{k=1}^{p-1} (p - k) rho^{2k}] / p. Independent of eta.
inline double ar1_sphericity(int p, double rho) {
  double acc = p;
  double r2k = 1.0;
  for (int k = 1; k < p; ++k) {
    r2k *= rho * rho;
    acc += 2.0 * (p - k) * r2k;
  }
  return acc / p;
}

enum class Family { MVN, TDist };

/// Centered elliptical law with covariance `covariance`. For the t family the
/// scatter parameter is ((nu - 2)/nu) times the covariance.
class EllipticalModel {
 public:
  static EllipticalModel mvn(ScatterMatrix covariance) {
    return EllipticalModel(Family::MVN, 0.0, std::move(covariance));
  }
  static EllipticalModel t(double nu, ScatterMatrix covariance) {
    if (!(nu > 2.0)) throw DomainError("t model: nu must exceed 2 for a finite covariance");
    return EllipticalModel(Family::TDist, nu, std::move(covariance));
  }

  Family family() const noexcept { return family_; }
  double nu() const {
    if (family_ != Family::TDist) throw std::logic_error("nu() on a non-t model");
    return nu_;
  }
  int dim() const noexcept { return cov_.dim(); }
  const ScatterMatrix& covariance() const noexcept { return cov_; }

  /// Elliptical kurtosis; empty when the fourth moments do not exist (t, nu <= 4).
  std::optional<double> kappa() const {
    if (family_ == Family::MVN) return 0.0;
    if (nu_ > 4.0) return 2.0 / (nu_ - 4.0);
    return std::nullopt;
  }

  std::string name() const {
    return family_ == Family::MVN ? "mvn" : "t" + std::to_string(nu_);
  }

 private:
  EllipticalModel(Family f, double nu, ScatterMatrix cov) : family_(f), nu_(nu), cov_(std::move(cov)) {}

  Family family_;
  double nu_;
  ScatterMatrix cov_;
};

/// SplitMix64 finalizer; derives independent per-trial seeds from a root seed.
inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream) {
  std::uint64_t z = root + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// n draws from the model; MVN as L z, t as L z sqrt((nu - 2) / w) with
/// w ~ chi2_nu, so that cov(x) equals the model covariance in both cases.
inline DataSample sample(const EllipticalModel& model, int n, std::uint64_t seed) {
  if (n < 1) throw DomainError("sample: n must be >= 1");
  const int p = model.dim();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Matrix z(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) z(i, j) = normal(rng);
  Matrix x = z * model.covariance().cholesky_factor().transpose();
  if (model.family() == Family::TDist) {
    std::chi_squared_distribution<double> chi2(model.nu());
    for (int i = 0; i < n; ++i) x.row(i) *= std::sqrt((model.nu() - 2.0) / chi2(rng));
  }
  return DataSample(std::move(x));
}

namespace detail {

// Gamma(shape, scale 2) density, i.e. chi-squared with real dof k = 2 shape.
struct Chi2Density {
  explicit Chi2Density(double k) : half_k(0.5 * k), log_norm(-half_k * std::log(2.0) - std::lgamma(half_k)) {}
  double operator()(double x) const {
    if (x <= 0.0) return 0.0;
    return std::exp(log_norm + (half_k - 1.0) * std::log(x) - 0.5 * x);
  }
  double half_k;
  double log_norm;
};

// E[h(y)] for y ~ chi2_k, splitting the range at `split` (a kink of h, or the
// mean when h is smooth).
inline double chi2_expectation(double k, const std::function<double(double)>& h, double split) {
  thread_local boost::math::quadrature::tanh_sinh<double> finite;
  thread_local boost::math::quadrature::exp_sinh<double> half_line;
  const Chi2Density f(k);
  // Quadrature nodes can land within denormal distance of 0, where h may
  // overflow; the mass there is negligible.
  auto integrand = [&](double y) {
    const double d = f(y);
    if (d == 0.0 || y < 1e-150) return 0.0;
    return d * h(y);
  };
  constexpr double tol = 1e-10;
  double total = 0.0;
  if (split > 0.0) total += finite.integrate(integrand, 0.0, split, tol);
  total += half_line.integrate([&](double y) { return integrand(y + split); }, tol);
  return total;
}

}  // namespace detail

/// E[h(r)] for the radial variable r = x^T Cov^{-1} x of the model: chi2_p for
/// MVN, and (nu - 2) y / w with y ~ chi2_p, w ~ chi2_nu for t (evaluated as
/// an iterated integral over w of an inner chi2_p expectation). `kink`, when
/// given, is a point where h is not smooth.
inline double radial_expectation(const EllipticalModel& model, const std::function<double(double)>& h,
                                 std::optional<double> kink = std::nullopt) {
  const double p = model.dim();
  if (model.family() == Family::MVN) return detail::chi2_expectation(p, h, kink.value_or(p));
  const double nu = model.nu();
  auto inner = [&](double w) {
    const double scale = (nu - 2.0) / w;
    auto hy = [&](double y) { return h(scale * y); };
    return detail::chi2_expectation(p, hy, kink ? *kink / scale : p);
  };
  return detail::chi2_expectation(nu, inner, nu);
}

/// Scale sigma solving E[psi(r / sigma)] = p, where r = x^T Cov^{-1} x.
inline double solve_sigma(const EllipticalModel& model, const WeightSpec& w) {
  if (!w.resolved()) throw std::logic_error("solve_sigma: weight must be resolved");
  if (w.dim() != model.dim()) throw DomainError("solve_sigma: dimension mismatch");
  const double p = model.dim();
  auto residual = [&](double log_sigma) {
    const double sigma = std::exp(log_sigma);
    std::optional<double> kink;
    if (w.kink()) kink = *w.kink() * sigma;
    return radial_expectation(model, [&](double r) { return w.psi(r / sigma); }, kink) - p;
  };
  double lo = std::log(1e-3);
  double hi = std::log(1e3);
  double flo = residual(lo);
  double fhi = residual(hi);
  if (!(flo >= 0.0 && fhi <= 0.0))
    throw std::runtime_error("solve_sigma: root not bracketed on [1e-3, 1e3] for " + w.name());
  if (flo == 0.0) return std::exp(lo);
  if (fhi == 0.0) return std::exp(hi);
  std::uintmax_t max_iter = 200;
  const auto [a, b] = boost::math::tools::toms748_solve(residual, lo, hi, flo, fhi,
                                                        boost::math::tools::eps_tolerance<double>(48), max_iter);
  return std::exp(0.5 * (a + b));
}

/// E[psi(r/sigma)^2] / (p(p+2)).
inline double psi1_population(const EllipticalModel& model, const WeightSpec& w, double sigma) {
  const double p = model.dim();
  std::optional<double> kink;
  if (w.kink()) kink = *w.kink() * sigma;
  const double m2 = radial_expectation(
      model,
      [&](double r) {
        const double s = w.psi(r / sigma);
        return s * s;
      },
      kink);
  return m2 / (p * (p + 2.0));
}

struct PopulationOracle {
  double sigma;
  ScatterMatrix m_functional;
  double gamma;
  /// Empty when the fourth moments do not exist.
  std::optional<double> kappa;
  double psi1;
};

/// M-functional sigma * Cov of the weight under the model, with the
/// population sphericity, kurtosis and psi1.
inline PopulationOracle m_functional(const EllipticalModel& model, const WeightSpec& w) {
  const double sigma = solve_sigma(model, w);
  ScatterMatrix m0 = model.covariance().scaled(sigma);
  const double gamma = m0.sphericity();
  return {sigma, std::move(m0), gamma, model.kappa(), psi1_population(model, w, sigma)};
}

/// 1-step estimator C = (1/n) sum u(x_i^T M0^{-1} x_i) x_i x_i^T with weights
/// evaluated at the known M-functional M0.
inline ScatterMatrix one_step_c(const DataSample& data, const ScatterMatrix& m0, const WeightSpec& w) {
  if (!w.resolved()) throw std::logic_error("one_step_c: weight must be resolved");
  const Vector t = m0.quad_forms(data);
  Vector u(t.size());
  for (Eigen::Index i = 0; i < t.size(); ++i) u(i) = w.u(t(i));
  return ScatterMatrix(detail::weighted_outer_mean(data, u));
}

}  // namespace shrinkm

#endif  // SHRINKM_ELLIPTICAL_HPP
