#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "cdpnes/privacy.hpp"
#include "cdpnes/sensitivity.hpp"

namespace cdpnes {
namespace {

TEST(Laplace, ZeroThetaIsDeterministicZero) {
  Rng rng(1);
  const Eigen::MatrixXd z = laplace_sample(0.0, 4, 7, rng);
  EXPECT_TRUE(z.isZero(0.0));
}

TEST(Laplace, RejectsNegativeScale) {
  Rng rng(1);
  EXPECT_THROW(laplace_sample(-1.0, 1, 1, rng), std::invalid_argument);
}

TEST(Laplace, MomentsAtMillionSamples) {
  Rng rng(2024);
  const int n = 1000000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.laplace(1.0);
    sum += x;
    sumsq += x * x;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  EXPECT_NEAR(mean, 0.0, 3.0 * std::sqrt(2.0 / n));
  EXPECT_NEAR(var, 2.0, 0.01 * 2.0);  // Var = 2 theta^2 within 1%
}

TEST(Laplace, KolmogorovSmirnovAgainstAnalyticCdf) {
  Rng rng(7);
  const int n = 1000000;
  std::vector<double> xs(n);
  for (double& x : xs) x = rng.laplace(1.0);
  std::sort(xs.begin(), xs.end());
  auto cdf = [](double x) {
    return x < 0.0 ? 0.5 * std::exp(x) : 1.0 - 0.5 * std::exp(-x);
  };
  double ks = 0.0;
  for (int i = 0; i < n; ++i) {
    const double f = cdf(xs[i]);
    ks = std::max(ks, std::abs(f - static_cast<double>(i) / n));
    ks = std::max(ks, std::abs(static_cast<double>(i + 1) / n - f));
  }
  EXPECT_LT(ks, 0.005);
}

TEST(NoiseScale, KnownValue) {
  PrivacyBudget b;
  b.epsilon = Eigen::VectorXd::Constant(3, 1.0);
  b.horizon = 8000;
  b.M = 10.0;
  b.gamma = 0.01;
  b.eta = 0.01;
  const Eigen::VectorXd t = min_noise_scale(b);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(t(i), 16.0, 1e-12);
  b.epsilon = Eigen::VectorXd::Constant(3, 2.0);
  EXPECT_NEAR(min_noise_scale(b)(0), 8.0, 1e-12);
  b.horizon = 0;
  EXPECT_EQ(min_noise_scale(b)(0), 0.0);
}

TEST(NoiseScale, StrictMonotonicity) {
  PrivacyBudget base;
  base.epsilon = Eigen::VectorXd::Constant(1, 1.5);
  base.horizon = 100;
  base.M = 3.0;
  base.gamma = 0.05;
  base.eta = 0.02;
  const double t0 = min_noise_scale(base)(0);
  auto scaled = [&](auto mutate) {
    PrivacyBudget b = base;
    mutate(b);
    return min_noise_scale(b)(0);
  };
  EXPECT_GT(scaled([](PrivacyBudget& b) { b.gamma *= 1.1; }), t0);
  EXPECT_GT(scaled([](PrivacyBudget& b) { b.eta *= 1.1; }), t0);
  EXPECT_GT(scaled([](PrivacyBudget& b) { b.horizon += 1; }), t0);
  EXPECT_GT(scaled([](PrivacyBudget& b) { b.M *= 1.1; }), t0);
  EXPECT_LT(scaled([](PrivacyBudget& b) { b.epsilon.array() *= 1.1; }), t0);
}

TEST(NoiseScale, BudgetReportShape) {
  PrivacyBudget b;
  b.epsilon = Eigen::VectorXd::Constant(2, 1.0);
  b.horizon = 10;
  b.M = 1.0;
  b.gamma = 0.1;
  b.eta = 0.1;
  const auto rows = budget_report(b);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_NEAR(rows[0].theta_chosen, 1.01 * rows[0].theta_min, 1e-15);
  const std::string csv = budget_report_csv(rows);
  EXPECT_EQ(csv.find("agent,epsilon,theta_min,theta_chosen\n"), 0u);
}

TEST(NoiseStreams, EngineDrawsExactlyOneVectorPerAgentPerStep) {
  // with gamma = 0 the update degenerates to x <- x + xi, so K steps must
  // reproduce the stream-derived noise sums exactly, in engine add order
  const int n = 3, d = 1;
  const MixingMatrix g = build_ring(n, 0.5);
  const QuadraticGame game = random_quadratic_game(n, 5);
  RunParams p;
  p.gamma = 0.0;
  p.eta = 0.7;  // irrelevant at gamma = 0
  p.alpha = 0.5;
  p.horizon = 5;
  p.noise = NoiseParams::uniform(n, 0.8);
  p.seed = 77;
  const Eigen::MatrixXd x0 = random_initial_estimates(n, d, 0.0, 1.0, 1);
  const RunResult res = run(game, g, p, x0, Eigen::MatrixXd::Zero(n, n));

  Eigen::MatrixXd want = x0;
  for (int k = 0; k < p.horizon; ++k) {
    for (int i = 0; i < n; ++i) {
      Rng stream = derive_stream(p.seed, i, k, StreamPurpose::kNoise);
      Eigen::VectorXd xi(n * d);
      for (int j = 0; j < n * d; ++j) xi(j) = stream.laplace(p.noise.theta(i));
      want.row(i) = (want.row(i).transpose() + xi).transpose();
    }
  }
  EXPECT_EQ(stack_estimates(res.final_states), want);
}

TEST(NoiseStreams, MultiDimensionalActionsDrawFullBlocks) {
  // same degenerate walk with d = 2: each agent must consume n*d Laplace
  // draws per iteration
  const int n = 3, d = 2;
  const ConnectivityControlGame game(n);
  const MixingMatrix g = build_ring(n, 0.5);
  RunParams p;
  p.gamma = 0.0;
  p.eta = 0.1;
  p.alpha = 0.5;
  p.horizon = 3;
  p.noise = NoiseParams::uniform(n, 0.4);
  p.seed = 21;
  const Eigen::MatrixXd x0 = random_initial_estimates(n, d, 0.0, 1.0, 2);
  const RunResult res = run(game, g, p, x0, Eigen::MatrixXd::Zero(n, n * d));

  Eigen::MatrixXd want = x0;
  for (int k = 0; k < p.horizon; ++k) {
    for (int i = 0; i < n; ++i) {
      Rng stream = derive_stream(p.seed, i, k, StreamPurpose::kNoise);
      Eigen::VectorXd xi(n * d);
      for (int j = 0; j < n * d; ++j) xi(j) = stream.laplace(p.noise.theta(i));
      want.row(i) = (want.row(i).transpose() + xi).transpose();
    }
  }
  EXPECT_EQ(stack_estimates(res.final_states), want);
}

TEST(Adjacency, DetectsDifferingAgents) {
  const QuadraticGame g1 = random_quadratic_game(4, 1);
  Eigen::MatrixXd q2 = g1.q();
  q2(3, 1) += 1.0;
  const QuadraticGame g2(q2, g1.c());
  const std::vector<int> diff = differing_agents(g1, g2);
  ASSERT_EQ(diff.size(), 1u);
  EXPECT_EQ(diff[0], 3);
  EXPECT_TRUE(differing_agents(g1, g1).empty());
}

TEST(Sensitivity, IdenticalGamesGiveZero) {
  const int n = 3;
  const MixingMatrix g = build_ring(n, 0.5);
  const BoxConstraint box = BoxConstraint::cube(1, -5.0, 5.0);
  const QuadraticGame game = random_quadratic_game(n, 2, 1.0, box);
  RunParams p;
  p.gamma = 0.05;
  p.eta = 0.05;
  p.alpha = 0.5;
  p.horizon = 50;
  p.noise = NoiseParams::uniform(n, 0.1);
  p.projected = true;
  p.seed = 3;
  const SensitivityCheckResult res = step_sensitivity_check(
      game, game, g, p, random_initial_estimates(n, 1, 0, 1, 4),
      Eigen::MatrixXd::Zero(n, n));
  EXPECT_EQ(res.max_step_l1, 0.0);
  EXPECT_TRUE(res.within_bound);
}

TEST(Sensitivity, ZeroGammaGivesZero) {
  const int n = 3;
  const MixingMatrix g = build_ring(n, 0.5);
  const BoxConstraint box = BoxConstraint::cube(1, -5.0, 5.0);
  const QuadraticGame g1 = random_quadratic_game(n, 6, 1.0, box);
  Eigen::VectorXd c2 = g1.c();
  c2(1) += 1.0;
  const QuadraticGame g2(g1.q(), c2, box);
  RunParams p;
  p.gamma = 0.0;
  p.eta = 0.5;
  p.alpha = 0.5;
  p.horizon = 40;
  p.noise = NoiseParams::uniform(n, 0.2);
  p.seed = 8;
  const SensitivityCheckResult res = step_sensitivity_check(
      g1, g2, g, p, random_initial_estimates(n, 1, 0, 1, 5),
      Eigen::MatrixXd::Zero(n, n));
  EXPECT_EQ(res.max_step_l1, 0.0);  // no update, trajectories never separate
  EXPECT_EQ(res.bound, 0.0);
}

TEST(Sensitivity, ConnectivityPairWithinBound) {
  // two connectivity games differing in agent 0's local target offset
  class ShiftedConnectivity : public ConnectivityControlGame {
   public:
    explicit ShiftedConnectivity(int n) : ConnectivityControlGame(n) {}
    Eigen::VectorXd partial_gradient(int i, const Eigen::MatrixXd& est) const override {
      Eigen::VectorXd g = ConnectivityControlGame::partial_gradient(i, est);
      if (i == 0) g.array() += 0.5;  // r_1 shifted
      return g;
    }
    const AffineGradientStructure* affine() const override { return nullptr; }
  };
  const int n = 5;
  const ConnectivityControlGame g1(n);
  const ShiftedConnectivity g2(n);
  const MixingMatrix g = build_random_strongly_connected(n, 0.4, 9);
  RunParams p;
  p.gamma = 0.01;
  p.eta = 0.01;
  p.alpha = 0.05;
  p.horizon = 100;
  p.noise = NoiseParams::uniform(n, 0.5);
  p.compressor = Compressor::stochastic_quantize(2);
  p.projected = true;
  p.seed = 10;
  const Eigen::MatrixXd x0 = random_initial_estimates(n, 2, 0.0, 1.0, 6);
  const SensitivityCheckResult res = step_sensitivity_check(
      g1, g2, g, p, x0, Eigen::MatrixXd::Zero(n, 2 * n));
  EXPECT_EQ(res.i0, 0);
  EXPECT_GT(res.max_step_l1, 0.0);
  EXPECT_TRUE(res.within_bound)
      << res.max_step_l1 << " vs bound " << res.bound;
}

TEST(Sensitivity, NonAdjacentRejected) {
  const QuadraticGame g1 = random_quadratic_game(4, 11);
  Eigen::MatrixXd q2 = g1.q();
  q2(0, 0) += 1.0;
  q2(2, 2) += 1.0;
  const QuadraticGame g2(q2, g1.c());
  const MixingMatrix g = build_ring(4, 0.5);
  RunParams p;
  p.alpha = 0.5;
  p.noise = NoiseParams::zero(4);
  EXPECT_THROW(step_sensitivity_check(g1, g2, g, p,
                                      Eigen::MatrixXd::Zero(4, 4),
                                      Eigen::MatrixXd::Zero(4, 4)),
               std::invalid_argument);
}

}  // namespace
}  // namespace cdpnes
