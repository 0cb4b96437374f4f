#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "shrinkm/simharness.hpp"

using namespace shrinkm;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig cfg;
  cfg.p = 6;
  cfg.n_grid = {10, 20};
  cfg.trials = 12;
  cfg.family = Family::TDist;
  cfg.nu = 5.0;
  cfg.root_seed = 99;
  cfg.threads = 1;
  return cfg;
}

std::string csv_of(const ExperimentResult& r) {
  std::ostringstream out;
  write_result_csv(out, r);
  return out.str();
}

}  // namespace

TEST(Nmse, Examples) {
  const ScatterMatrix m0 = ar1_scatter(40, 0.6, 10.0);
  EXPECT_EQ(nmse(m0, m0), 0.0);
  EXPECT_DOUBLE_EQ(nmse(Matrix::Zero(40, 40), m0.matrix()), 1.0);
  const Matrix spherical = (m0.trace() / 40.0) * Matrix::Identity(40, 40);
  EXPECT_NEAR(nmse(spherical, m0.matrix()), 1.0 - 1.0 / m0.sphericity(), 1e-12);
  EXPECT_NEAR(nmse(spherical, m0.matrix()), 0.519, 1e-3);
  EXPECT_THROW(nmse(Matrix::Zero(3, 3), m0.matrix()), DomainError);
}

TEST(MeanSeTest, KnownValues) {
  MeanSe a;
  for (double x : {1.0, 2.0, 3.0, 4.0}) a.add(x);
  EXPECT_DOUBLE_EQ(a.mean(), 2.5);
  EXPECT_NEAR(a.se(), std::sqrt(5.0 / 3.0 / 4.0), 1e-15);
  EXPECT_TRUE(std::isnan(MeanSe{}.mean()));
}

TEST(ParallelFor, CoversEveryIndexAndPropagatesErrors) {
  std::vector<int> hits(100, 0);
  parallel_for(100, [&](int i) { hits[i]++; }, 4);
  for (int h : hits) EXPECT_EQ(h, 1);
  EXPECT_THROW(parallel_for(10, [](int i) { if (i == 7) throw std::runtime_error("x"); }, 3), std::runtime_error);
}

TEST(Experiment, CsvHeader) {
  ExperimentConfig cfg = small_config();
  cfg.trials = 2;
  const std::string csv = csv_of(run_experiment(cfg));
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "estimator,n,nmse_mean,nmse_se,beta_mean,beta_se,failures");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 4 * 2);
}

TEST(Experiment, ReproducibleAndThreadIndependent) {
  ExperimentConfig cfg = small_config();
  const std::string serial = csv_of(run_experiment(cfg));
  EXPECT_EQ(serial, csv_of(run_experiment(cfg)));
  cfg.threads = 4;
  EXPECT_EQ(serial, csv_of(run_experiment(cfg)));
  cfg.root_seed = 100;
  EXPECT_NE(serial, csv_of(run_experiment(cfg)));
}

TEST(Experiment, FailuresPlusSuccessesEqualTrials) {
  ExperimentConfig cfg = small_config();
  cfg.n_grid = {7, 9};  // barely above p: some robust fits may fail
  const ExperimentResult r = run_experiment(cfg);
  for (const auto& c : r.cells) {
    EXPECT_EQ(c.nmse.count + c.failures, cfg.trials);
    EXPECT_EQ(c.beta.count, c.nmse.count);
  }
}

TEST(Experiment, NonConvergenceCountsAsFailure) {
  ExperimentConfig cfg = small_config();
  cfg.estimators = {Method::Huber};
  cfg.solver = SolverOptions{1e-14, 1};
  const ExperimentResult r = run_experiment(cfg);
  for (const auto& c : r.cells) EXPECT_EQ(c.failures, cfg.trials);
}

TEST(Experiment, ScoresAgainstScaledTargets) {
  ExperimentConfig cfg = small_config();
  cfg.trials = 1;
  const ExperimentResult r = run_experiment(cfg);
  EXPECT_NEAR(r.sigma.at(Method::Gauss), 1.0, 1e-8);
  EXPECT_NEAR(r.sigma.at(Method::TMle), 0.6, 1e-8);
  EXPECT_LT(r.sigma.at(Method::Huber), 1.0);
  cfg.family = Family::MVN;
  EXPECT_NEAR(run_experiment(cfg).sigma.at(Method::TMle), 1.0, 1e-8);
}

TEST(Experiment, CellLookup) {
  ExperimentConfig cfg = small_config();
  cfg.trials = 1;
  const ExperimentResult r = run_experiment(cfg);
  EXPECT_EQ(r.cell(Method::LW, 20).n, 20);
  EXPECT_THROW(r.cell(Method::LW, 30), std::out_of_range);
}

TEST(ConfigValidation, RejectsBadSettings) {
  auto bad = [](auto mutate) {
    ExperimentConfig cfg = small_config();
    mutate(cfg);
    return cfg;
  };
  EXPECT_NO_THROW(small_config().validate());
  EXPECT_THROW(bad([](auto& c) { c.n_grid = {6}; }).validate(), DomainError);
  EXPECT_THROW(bad([](auto& c) { c.n_grid.clear(); }).validate(), DomainError);
  EXPECT_THROW(bad([](auto& c) { c.rho = 1.0; }).validate(), DomainError);
  EXPECT_THROW(bad([](auto& c) { c.nu = 2.0; }).validate(), DomainError);
  EXPECT_THROW(bad([](auto& c) { c.trials = 0; }).validate(), DomainError);
  EXPECT_THROW(bad([](auto& c) { c.huber_q = 1.0; }).validate(), DomainError);
  EXPECT_THROW(bad([](auto& c) { c.estimators.clear(); }).validate(), DomainError);
}

TEST(BetaGridTest, Spacing) {
  const auto g = beta_grid(0.02);
  ASSERT_EQ(g.size(), 51u);
  EXPECT_EQ(g.front(), 0.0);
  EXPECT_EQ(g.back(), 1.0);
  EXPECT_NEAR(g[25], 0.5, 1e-15);
}

TEST(OracleBeta, SphericalModelShrinksHard) {
  const auto model = EllipticalModel::mvn(ScatterMatrix::identity(5, 2.0));
  const auto r = oracle_beta_grid(model, WeightSpec::gaussian(5), 20, 500, beta_grid(0.05), 3, 1);
  EXPECT_LE(r.beta_star, 0.1);
}

TEST(OracleBeta, CurveIsConvexAndNearClosedForm) {
  const auto model = EllipticalModel::mvn(ar1_scatter(5, 0.6, 1.0));
  const auto w = WeightSpec::gaussian(5);
  const auto r = oracle_beta_grid(model, w, 50, 2000, beta_grid(0.05), 4, 1);
  // Each trial's loss is quadratic in beta, so the mean curve has constant
  // nonnegative second differences.
  for (std::size_t k = 2; k < r.mse.size(); ++k)
    EXPECT_GE(r.mse[k] - 2.0 * r.mse[k - 1] + r.mse[k - 2], -1e-9 * r.mse[k]);
  EXPECT_NEAR(r.beta_star, beta_app(r.oracle.gamma, r.oracle.psi1, 50, 5), 0.1);
  EXPECT_NEAR(r.oracle.psi1, 1.0, 1e-8);
}

TEST(OracleBeta, RejectsBadGrid) {
  const auto model = EllipticalModel::mvn(ScatterMatrix::identity(3));
  EXPECT_THROW(oracle_beta_grid(model, WeightSpec::gaussian(3), 10, 5, {}, 1), DomainError);
  EXPECT_THROW(oracle_beta_grid(model, WeightSpec::gaussian(3), 10, 5, {1.5}, 1), DomainError);
}

TEST(MomentChecks, GaussianWeightAtNormal) {
  const auto model = EllipticalModel::mvn(ar1_scatter(4, 0.5, 1.0));
  const auto checks = c_moment_checks(model, WeightSpec::gaussian(4), 30, 4000, 12, 1);
  ASSERT_EQ(checks.size(), 3u);
  for (const auto& c : checks) EXPECT_TRUE(c.within(4.0)) << c.name << " z=" << c.z();
}

TEST(MomentCheckTest, ZScore) {
  const MomentCheck c{"x", 10.0, 2.0, 7.0};
  EXPECT_DOUBLE_EQ(c.z(), 1.5);
  EXPECT_TRUE(c.within(1.5));
  EXPECT_FALSE(c.within(1.4));
}
