#ifndef SHRINKM_SIMHARNESS_HPP
#define SHRINKM_SIMHARNESS_HPP

// Monte-Carlo study of the shrinkage estimators on AR(1) elliptical data, and
// the brute-force checks of the optimal-shrinkage formulas against the
// 1-step estimator C.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <iomanip>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "shrinkm/elliptical.hpp"
#include "shrinkm/shrinkage.hpp"

namespace shrinkm {

/// |A - M0|_F^2 / |M0|_F^2.
inline double nmse(const Matrix& estimate, const Matrix& m0) {
  if (estimate.rows() != m0.rows() || estimate.cols() != m0.cols())
    throw DomainError("nmse: dimension mismatch");
  return (estimate - m0).squaredNorm() / m0.squaredNorm();
}

inline double nmse(const ScatterMatrix& estimate, const ScatterMatrix& m0) {
  return nmse(estimate.matrix(), m0.matrix());
}

/// Runs body(i) for i in [0, count) on up to `threads` workers. Callers write
/// results into per-index slots so the outcome is independent of scheduling.
template <class Body>
void parallel_for(int count, Body&& body, unsigned threads = 0) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max(count, 1)));
  if (threads <= 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr first_error;
  std::atomic<bool> failed{false};
  std::mutex error_mutex;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (int i = next++; i < count && !failed; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          failed = true;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

/// Running mean and standard error, accumulated in a fixed order.
struct MeanSe {
  double sum = 0.0;
  double sum_sq = 0.0;
  long count = 0;

  void add(double x) {
    sum += x;
    sum_sq += x * x;
    ++count;
  }
  double mean() const { return count ? sum / count : std::nan(""); }
  double se() const {
    if (count < 2) return std::nan("");
    const double m = mean();
    const double var = std::max(0.0, (sum_sq - count * m * m) / (count - 1));
    return std::sqrt(var / count);
  }
};

struct ExperimentConfig {
  int p = 40;
  double rho = 0.6;
  double eta = 10.0;
  Family family = Family::MVN;
  double nu = 5.0;
  std::vector<int> n_grid = {60, 100, 140, 180, 220, 260, 280};
  int trials = 2000;
  std::vector<Method> estimators = {Method::Gauss, Method::LW, Method::Huber, Method::TMle};
  double huber_q = 0.7;
  HuberTail huber_tail = HuberTail::Upper;
  std::uint64_t root_seed = 20200504;
  unsigned threads = 0;
  SolverOptions solver;

  void validate() const {
    if (p < 3) throw DomainError("config: p must be >= 3");
    if (!(rho >= 0.0 && rho < 1.0)) throw DomainError("config: rho must lie in [0, 1)");
    if (!(eta > 0.0)) throw DomainError("config: eta must be positive");
    if (family == Family::TDist && !(nu > 2.0)) throw DomainError("config: nu must exceed 2");
    if (trials < 1) throw DomainError("config: trials must be >= 1");
    if (n_grid.empty()) throw DomainError("config: n grid is empty");
    for (int n : n_grid)
      if (n <= p) throw DomainError("config: every n must exceed p (got n=" + std::to_string(n) + ")");
    if (estimators.empty()) throw DomainError("config: no estimators selected");
    if (!(huber_q > 0.0 && huber_q < 1.0)) throw DomainError("config: huber q must lie in (0, 1)");
  }

  EllipticalModel model() const {
    ScatterMatrix cov = ar1_scatter(p, rho, eta);
    return family == Family::MVN ? EllipticalModel::mvn(std::move(cov)) : EllipticalModel::t(nu, std::move(cov));
  }
};

struct ExperimentCell {
  Method method;
  int n;
  MeanSe nmse;
  MeanSe beta;
  int failures = 0;
};

struct ExperimentResult {
  std::vector<ExperimentCell> cells;
  /// Scale sigma of the M-functional each estimator is scored against.
  std::map<Method, double> sigma;

  const ExperimentCell& cell(Method m, int n) const {
    for (const auto& c : cells)
      if (c.method == m && c.n == n) return c;
    throw std::out_of_range("no result cell for " + std::string(method_name(m)) + ", n=" + std::to_string(n));
  }
};

/// Weight whose M-functional an estimator is scored against. The adaptive t
/// estimator is scored at the population dof (the Gaussian limit for MVN).
inline WeightSpec target_weight(Method m, const ExperimentConfig& cfg) {
  switch (m) {
    case Method::Gauss:
    case Method::LW:
      return WeightSpec::gaussian(cfg.p);
    case Method::Huber:
      return WeightSpec::huber(cfg.p, cfg.huber_q, cfg.huber_tail);
    case Method::TMle:
      return cfg.family == Family::TDist ? WeightSpec::t_mle(cfg.p, cfg.nu) : WeightSpec::gaussian(cfg.p);
  }
  throw std::logic_error("target_weight: unhandled method");
}

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const EllipticalModel model = cfg.model();

  ExperimentResult result;
  std::vector<ScatterMatrix> targets;
  for (Method m : cfg.estimators) {
    const double sigma = solve_sigma(model, target_weight(m, cfg));
    result.sigma[m] = sigma;
    targets.push_back(model.covariance().scaled(sigma));
  }

  EstimateOptions opts;
  opts.huber_q = cfg.huber_q;
  opts.huber_tail = cfg.huber_tail;
  opts.solver = cfg.solver;
  const std::size_t n_est = cfg.estimators.size();

  for (std::size_t ni = 0; ni < cfg.n_grid.size(); ++ni) {
    const int n = cfg.n_grid[ni];
    const std::uint64_t n_seed = derive_seed(cfg.root_seed, static_cast<std::uint64_t>(n));
    // Per (trial, estimator) slots; empty marks a failed estimate.
    std::vector<std::optional<std::pair<double, double>>> slots(static_cast<std::size_t>(cfg.trials) * n_est);
    parallel_for(
        cfg.trials,
        [&](int trial) {
          const DataSample data = sample(model, n, derive_seed(n_seed, static_cast<std::uint64_t>(trial)));
          for (std::size_t e = 0; e < n_est; ++e) {
            try {
              const ShrinkageEstimate est = estimate(data, cfg.estimators[e], opts);
              if (!est.diagnostics.solve_report.converged) continue;
              slots[trial * n_est + e] = std::make_pair(nmse(est.matrix, targets[e]), est.beta);
            } catch (const std::runtime_error&) {
            } catch (const std::logic_error&) {
            }
          }
        },
        cfg.threads);

    for (std::size_t e = 0; e < n_est; ++e) {
      ExperimentCell cell{cfg.estimators[e], n, {}, {}, 0};
      for (int trial = 0; trial < cfg.trials; ++trial) {
        const auto& s = slots[trial * n_est + e];
        if (!s) {
          ++cell.failures;
          continue;
        }
        cell.nmse.add(s->first);
        cell.beta.add(s->second);
      }
      result.cells.push_back(cell);
    }
  }
  return result;
}

inline constexpr const char* kResultCsvHeader = "estimator,n,nmse_mean,nmse_se,beta_mean,beta_se,failures";

inline void write_result_csv(std::ostream& out, const ExperimentResult& r) {
  out << kResultCsvHeader << '\n';
  out << std::setprecision(10);
  for (const auto& c : r.cells) {
    out << method_name(c.method) << ',' << c.n << ',' << c.nmse.mean() << ',' << c.nmse.se() << ','
        << c.beta.mean() << ',' << c.beta.se() << ',' << c.failures << '\n';
  }
}

struct OracleBetaResult {
  double beta_star;
  std::vector<double> grid;
  std::vector<double> mse;
  std::vector<double> mse_se;
  PopulationOracle oracle;
};

/// Brute-force minimizer over `grid` of the Monte-Carlo mean of
/// |C_beta - M0|_F^2, C_beta being the shrunk 1-step estimator.
inline OracleBetaResult oracle_beta_grid(const EllipticalModel& model, const WeightSpec& w, int n, int trials,
                                         const std::vector<double>& grid, std::uint64_t seed,
                                         unsigned threads = 0) {
  if (grid.empty()) throw DomainError("oracle_beta_grid: empty grid");
  for (double b : grid)
    if (!(b >= 0.0 && b <= 1.0)) throw DomainError("oracle_beta_grid: grid must lie in [0, 1]");
  if (trials < 1) throw DomainError("oracle_beta_grid: trials must be >= 1");

  PopulationOracle oracle = m_functional(model, w);
  const std::size_t g = grid.size();
  std::vector<double> losses(static_cast<std::size_t>(trials) * g);
  parallel_for(
      trials,
      [&](int trial) {
        const DataSample data = sample(model, n, derive_seed(seed, static_cast<std::uint64_t>(trial)));
        const ScatterMatrix c = one_step_c(data, oracle.m_functional, w);
        for (std::size_t k = 0; k < g; ++k)
          losses[trial * g + k] = (shrink(c, grid[k]).matrix() - oracle.m_functional.matrix()).squaredNorm();
      },
      threads);

  OracleBetaResult out{0.0, grid, std::vector<double>(g), std::vector<double>(g), std::move(oracle)};
  for (std::size_t k = 0; k < g; ++k) {
    MeanSe acc;
    for (int trial = 0; trial < trials; ++trial) acc.add(losses[trial * g + k]);
    out.mse[k] = acc.mean();
    out.mse_se[k] = acc.se();
  }
  const auto best = std::min_element(out.mse.begin(), out.mse.end()) - out.mse.begin();
  out.beta_star = grid[best];
  return out;
}

inline std::vector<double> beta_grid(double step) {
  std::vector<double> grid;
  const int steps = static_cast<int>(std::lround(1.0 / step));
  for (int k = 0; k <= steps; ++k) grid.push_back(std::min(1.0, k * step));
  return grid;
}

/// A Monte-Carlo estimate compared with its closed form.
struct MomentCheck {
  std::string name;
  double mc_mean;
  double mc_se;
  double theory;

  double z() const { return mc_se > 0.0 ? std::abs(mc_mean - theory) / mc_se : std::abs(mc_mean - theory) == 0.0 ? 0.0 : INFINITY; }
  bool within(double k_se) const { return z() <= k_se; }
};

/// Monte-Carlo checks of the moments of C under the model:
///   E[tr(C^2)]   = (1 + (2 psi1 - 1)/n) tr(M0^2) + (psi1/n) tr(M0)^2
///   E[tr(C)^2]   = (2 psi1/n) tr(M0^2) + (1 + (psi1 - 1)/n) tr(M0)^2
///   MSE(C_beta*) = (E[tr(C)^2] - tr(M0)^2)/p + (1 - beta*) |M0 - eta0 I|_F^2
/// at beta* = beta_app(gamma, psi1, n, p), all with population constants.
inline std::vector<MomentCheck> c_moment_checks(const EllipticalModel& model, const WeightSpec& w, int n,
                                                int trials, std::uint64_t seed, unsigned threads = 0) {
  const PopulationOracle oracle = m_functional(model, w);
  const int p = model.dim();
  const Matrix& m0 = oracle.m_functional.matrix();
  const double tr = m0.trace();
  const double tr2 = m0.squaredNorm();
  const double psi1 = oracle.psi1;
  const double beta_star = beta_app(oracle.gamma, psi1, n, p);

  std::vector<std::array<double, 3>> per_trial(static_cast<std::size_t>(trials));
  parallel_for(
      trials,
      [&](int trial) {
        const DataSample data = sample(model, n, derive_seed(seed, static_cast<std::uint64_t>(trial)));
        const ScatterMatrix c = one_step_c(data, oracle.m_functional, w);
        const double trc = c.trace();
        per_trial[trial] = {c.frobenius_norm_squared(), trc * trc,
                            (shrink(c, beta_star).matrix() - m0).squaredNorm()};
      },
      threads);

  MeanSe trc2, trc_sq, mse;
  for (const auto& v : per_trial) {
    trc2.add(v[0]);
    trc_sq.add(v[1]);
    mse.add(v[2]);
  }
  const double e_trc2 = (1.0 + (2.0 * psi1 - 1.0) / n) * tr2 + psi1 / n * tr * tr;
  const double e_trc_sq = 2.0 * psi1 / n * tr2 + (1.0 + (psi1 - 1.0) / n) * tr * tr;
  const double eta0 = tr / p;
  const double spread = tr2 - p * eta0 * eta0;  // |M0 - eta0 I|_F^2
  const double mse_opt = (e_trc_sq - tr * tr) / p + (1.0 - beta_star) * spread;
  return {{"E[tr(C^2)]", trc2.mean(), trc2.se(), e_trc2},
          {"E[tr(C)^2]", trc_sq.mean(), trc_sq.se(), e_trc_sq},
          {"MSE(C_beta) at optimum", mse.mean(), mse.se(), mse_opt}};
}

}  // namespace shrinkm

#endif  // SHRINKM_SIMHARNESS_HPP
