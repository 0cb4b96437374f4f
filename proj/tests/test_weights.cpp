#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "shrinkm/weights.hpp"

using namespace shrinkm;

namespace {

std::vector<double> log_grid() {
  std::vector<double> g{0.0};
  for (double e = -6.0; e <= 6.0; e += 0.05) g.push_back(std::pow(10.0, e));
  return g;
}

std::vector<WeightSpec> all_specs(int p) {
  return {WeightSpec::gaussian(p),       WeightSpec::huber(p, 0.7), WeightSpec::huber(p, 0.3),
          WeightSpec::huber(p, 0.99),    WeightSpec::t_mle(p, 1.0), WeightSpec::t_mle(p, 5.0),
          WeightSpec::t_mle(p, 1000.0)};
}

}  // namespace

TEST(HuberConstants, ThresholdIsChiSquaredQuantile) {
  EXPECT_NEAR(huber_c_squared(40, 0.7), 44.16, 0.01);
  EXPECT_NEAR(huber_c_squared(2, 0.5), 2.0 * std::numbers::ln2, 1e-10);
}

TEST(HuberConstants, ThresholdGrowsWithoutBoundAsLevelApproachesOne) {
  double prev = 0.0;
  for (double q : {0.9, 0.99, 0.999, 0.99999, 1.0 - 1e-9}) {
    const double c2 = huber_c_squared(1, q);
    EXPECT_GT(c2, prev);
    prev = c2;
  }
  EXPECT_GT(prev, 35.0);
}

TEST(HuberConstants, UpperTailReading) {
  EXPECT_DOUBLE_EQ(huber_level(0.7, HuberTail::Lower), 0.7);
  EXPECT_NEAR(huber_level(0.7, HuberTail::Upper), 0.3, 1e-15);
  EXPECT_NEAR(WeightSpec::huber(40, 0.7, HuberTail::Upper).c_squared(), huber_c_squared(40, 0.3), 1e-12);
  EXPECT_THROW(huber_level(1.0, HuberTail::Upper), DomainError);
}

TEST(HuberConstants, ConsistencyFactorLimits) {
  EXPECT_NEAR(huber_b(10, 1e4), 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(huber_b(10, INFINITY), 1.0);
  const double c2 = 1e-6;
  EXPECT_NEAR(huber_b(10, c2) / (c2 / 10.0), 1.0, 1e-4);
}

TEST(HuberConstants, ConsistencyFactorBounds) {
  for (int p : {1, 2, 5, 40})
    for (double q : {0.1, 0.5, 0.7, 0.95}) {
      const double c2 = huber_c_squared(p, q);
      const double b = huber_b(p, c2);
      EXPECT_GT(b, 0.0);
      EXPECT_LE(b, 1.0);
      EXPECT_LE(b, 1.0 + c2 / p);
    }
}

// b = E[min(t, c^2)] / p with t ~ chi2_p, estimated by Monte Carlo.
TEST(HuberConstants, ConsistencyFactorMatchesTruncatedMean) {
  const int p = 40;
  const double c2 = 44.16;
  std::mt19937_64 rng(11);
  std::chi_squared_distribution<double> chi2(p);
  const int draws = 400000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < draws; ++i) {
    const double v = std::min(chi2(rng), c2) / p;
    sum += v;
    sum_sq += v * v;
  }
  const double mean = sum / draws;
  const double se = std::sqrt((sum_sq / draws - mean * mean) / draws);
  const double b = huber_b(p, c2);
  EXPECT_GT(b, 0.0);
  EXPECT_LE(b, 1.0);
  EXPECT_NEAR(b, mean, 4.0 * se);
}

TEST(WeightU, GaussianIsConstantOne) {
  const auto w = WeightSpec::gaussian(3);
  for (double t : {0.0, 0.5, 1e6}) {
    EXPECT_EQ(w.u(t), 1.0);
    EXPECT_EQ(w.psi(t), t);
  }
}

TEST(WeightU, TWeightAtZero) {
  const auto w = WeightSpec::t_mle(40, 5.0);
  EXPECT_DOUBLE_EQ(w.u(0.0), 9.0);
  EXPECT_DOUBLE_EQ(weight_u(w, 0.0), 9.0);
}

TEST(WeightU, TPsiSaturatesAtPPlusNu) {
  const auto w = WeightSpec::t_mle(40, 5.0);
  EXPECT_NEAR(w.psi(1e12), 45.0, 1e-9);
  EXPECT_LT(w.psi(1e12), 45.0);
}

TEST(WeightU, HuberPiecewise) {
  const auto w = WeightSpec::huber(40, 0.7);
  const double c2 = w.c_squared();
  const double b = w.b();
  EXPECT_DOUBLE_EQ(w.u(0.0), 1.0 / b);
  EXPECT_DOUBLE_EQ(w.u(0.5 * c2), 1.0 / b);
  EXPECT_DOUBLE_EQ(w.u(c2), 1.0 / b);
  EXPECT_DOUBLE_EQ(w.u(2.0 * c2), 1.0 / (2.0 * b));
  EXPECT_DOUBLE_EQ(w.psi(0.0), 0.0);
  EXPECT_DOUBLE_EQ(w.psi(3.0 * c2), c2 / b);
  EXPECT_DOUBLE_EQ(psi(w, 10.0 * c2), c2 / b);
  ASSERT_TRUE(w.kink().has_value());
  EXPECT_EQ(*w.kink(), c2);
}

TEST(WeightU, NonIncreasingAndPsiNondecreasingOnLogGrid) {
  for (int p : {1, 5, 40})
    for (const auto& w : all_specs(p)) {
      const auto g = log_grid();
      for (std::size_t i = 1; i < g.size(); ++i) {
        EXPECT_GE(w.u(g[i]), 0.0);
        EXPECT_LE(w.u(g[i]), w.u(g[i - 1])) << w.name() << " t=" << g[i];
        EXPECT_GE(w.psi(g[i]), w.psi(g[i - 1])) << w.name() << " t=" << g[i];
      }
    }
}

TEST(WeightU, HuberApproachesGaussianAsLevelTendsToOne) {
  double prev_gap = INFINITY;
  for (double q : {0.9, 0.99, 0.9999, 1.0 - 1e-8}) {
    const auto w = WeightSpec::huber(5, q);
    double gap = 0.0;
    for (double t = 0.0; t <= 20.0; t += 0.1) gap = std::max(gap, std::abs(w.u(t) - 1.0));
    EXPECT_LE(gap, prev_gap);
    prev_gap = gap;
  }
  EXPECT_LT(prev_gap, 1e-6);
}

// E[psi_H(t)] / p = 1 for t ~ chi2_p, checked to 3 Monte-Carlo standard errors.
TEST(WeightU, HuberFisherConsistentAtNormal) {
  for (int p : {3, 40}) {
    const auto w = WeightSpec::huber(p, 0.7);
    std::mt19937_64 rng(3 + p);
    std::chi_squared_distribution<double> chi2(p);
    const int draws = 200000;
    double sum = 0.0, sum_sq = 0.0;
    for (int i = 0; i < draws; ++i) {
      const double v = w.psi(chi2(rng)) / p;
      sum += v;
      sum_sq += v * v;
    }
    const double mean = sum / draws;
    const double se = std::sqrt((sum_sq / draws - mean * mean) / draws);
    EXPECT_LE(std::abs(mean - 1.0), 3.0 * se) << "p=" << p;
  }
}

TEST(WeightSpec, AdaptiveDofMustBeResolved) {
  const auto w = WeightSpec::t_mle_adaptive(4);
  EXPECT_FALSE(w.resolved());
  EXPECT_THROW(w.u(1.0), std::logic_error);
  const auto r = w.with_dof(7.0);
  EXPECT_TRUE(r.resolved());
  EXPECT_DOUBLE_EQ(r.u(0.0), 11.0 / 7.0);
}

TEST(WeightSpec, ConstantsOnlyForTheirKind) {
  EXPECT_THROW(WeightSpec::gaussian(3).c_squared(), std::logic_error);
  EXPECT_THROW(WeightSpec::huber(3, 0.5).dof(), std::logic_error);
  EXPECT_THROW(WeightSpec::t_mle(3, 0.0), DomainError);
  EXPECT_THROW(WeightSpec::gaussian(0), DomainError);
}
