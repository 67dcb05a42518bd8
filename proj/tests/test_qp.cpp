#include <chrono>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "omnijump/qp.hpp"
#include "oracles.hpp"

using namespace omnijump;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

QpProblem half_line() {
  QpProblem p;
  p.H = Eigen::MatrixXd::Identity(1, 1);
  p.g = Eigen::VectorXd::Zero(1);
  p.G = Eigen::MatrixXd::Ones(1, 1);
  p.c_l = Eigen::VectorXd::Constant(1, 1.0);
  p.c_u = Eigen::VectorXd::Constant(1, kInf);
  return p;
}

QpProblem unconstrained() {
  QpProblem p;
  p.H = Eigen::MatrixXd::Identity(2, 2);
  p.g = Eigen::Vector2d(-1.0, -2.0);
  p.G.resize(0, 2);
  p.c_l.resize(0);
  p.c_u.resize(0);
  return p;
}

}  // namespace

TEST(QpSolve, ProjectionOntoHalfLine) {
  const QpSolution s = solve(half_line());
  ASSERT_EQ(s.status, QpStatus::Optimal);
  EXPECT_NEAR(s.x[0], 1.0, 1e-15);
  ASSERT_EQ(s.active_set.size(), 1u);
  EXPECT_EQ(s.active_set[0], (ActiveConstraint{0, BoundSide::Lower}));
  EXPECT_NEAR(s.multipliers[0], 1.0, 1e-15);
}

TEST(QpSolve, UnconstrainedStationaryPoint) {
  const QpSolution s = solve(unconstrained());
  ASSERT_EQ(s.status, QpStatus::Optimal);
  EXPECT_LT((s.x - Eigen::Vector2d(1.0, 2.0)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_TRUE(s.active_set.empty());
}

TEST(QpSolve, UpperBoundAndEqualityRows) {
  QpProblem p = unconstrained();
  p.G = Eigen::MatrixXd::Identity(2, 2);
  p.c_l = Eigen::Vector2d(-kInf, 0.5);
  p.c_u = Eigen::Vector2d(0.25, 0.5);
  const QpSolution s = solve(p);
  ASSERT_EQ(s.status, QpStatus::Optimal);
  EXPECT_NEAR(s.x[0], 0.25, 1e-14);
  EXPECT_NEAR(s.x[1], 0.5, 1e-14);
  EXPECT_LT(s.multipliers[0], 0.0);
}

TEST(QpSolve, MatchesEnumerationOracle) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> dim_n(1, 6), dim_m(0, 8);
  int optimal = 0;
  for (int seed = 0; seed < 500; ++seed) {
    const int n = seed < 250 ? 4 : dim_n(rng);
    const int m = seed < 250 ? 6 : dim_m(rng);
    const QpProblem p = oracle::random_qp(rng, n, m);
    const oracle::EnumerationResult ref = oracle::enumerate_qp(p);
    const QpSolution s = solve(p);
    if (!ref.feasible) {
      EXPECT_EQ(s.status, QpStatus::Infeasible) << "seed " << seed;
      continue;
    }
    ASSERT_EQ(s.status, QpStatus::Optimal) << "seed " << seed;
    ++optimal;
    EXPECT_LT((s.x - ref.x).cwiseAbs().maxCoeff(), 1e-8) << "seed " << seed;
    EXPECT_LT(max_bound_violation(p, s.x), 1e-8) << "seed " << seed;
    EXPECT_LT(kkt_residual(p, s.x, s.multipliers), 1e-8) << "seed " << seed;
  }
  EXPECT_GT(optimal, 450);
}

TEST(QpSolve, ReportsInfeasibleBounds) {
  QpProblem p = unconstrained();
  p.G.resize(2, 2);
  p.G << 1, 1, -1, -1;
  p.c_l = Eigen::Vector2d(1.0, 1.0);  // x0 + x1 >= 1 and x0 + x1 <= -1
  p.c_u = Eigen::Vector2d(kInf, kInf);
  EXPECT_EQ(solve(p).status, QpStatus::Infeasible);
}

TEST(QpSolve, SemidefiniteHessianIsRegularized) {
  QpProblem p = half_line();
  p.H = Eigen::MatrixXd::Zero(2, 2);
  p.H(0, 0) = 1.0;
  p.g = Eigen::VectorXd::Zero(2);
  p.G = Eigen::MatrixXd::Identity(2, 2);
  p.c_l = Eigen::Vector2d(1.0, -1.0);
  p.c_u = Eigen::Vector2d(kInf, 1.0);
  const QpSolution s = solve(p);
  ASSERT_EQ(s.status, QpStatus::Optimal);
  EXPECT_NEAR(s.x[0], 1.0, 1e-9);
  EXPECT_LE(std::abs(s.x[1]), 1.0 + 1e-8);
}

TEST(QpSolve, RepeatedSolvesAreBitwiseIdentical) {
  std::mt19937_64 rng(5);
  const QpProblem p = oracle::random_qp(rng, 12, 20);
  QpSolver solver;
  const QpSolution a = solver.solve(p);
  const QpSolution b = solver.solve(p);
  const QpSolution c = solve(p);
  ASSERT_EQ(a.x.size(), b.x.size());
  EXPECT_EQ(std::memcmp(a.x.data(), b.x.data(), sizeof(double) * a.x.size()), 0);
  EXPECT_EQ(std::memcmp(a.x.data(), c.x.data(), sizeof(double) * a.x.size()), 0);
  EXPECT_EQ(a.active_set, c.active_set);
}

TEST(QpSolve, TrackerSizedProblemIsFast) {
  std::mt19937_64 rng(9);
  const QpProblem p = oracle::random_qp(rng, 12, 20);
  QpSolver solver;
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < 200; ++i) solver.solve(p);
  const double per = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 200;
  EXPECT_LT(per, 1e-3);
}

TEST(KktResidual, ZeroAtHalfLineOptimum) {
  const QpSolution s = solve(half_line());
  EXPECT_LT(kkt_residual(half_line(), s.x, s.multipliers), 1e-10);
}

TEST(KktResidual, GrowsWhenPerturbed) {
  const QpProblem p = half_line();
  const QpSolution s = solve(p);
  const Eigen::VectorXd x = s.x + Eigen::VectorXd::Constant(1, 1e-3);
  EXPECT_GT(kkt_residual(p, x, s.multipliers), 1e-4);
}

TEST(KktResidual, UnconstrainedIsGradientNorm) {
  const QpProblem p = unconstrained();
  EXPECT_EQ(kkt_residual(p, Eigen::Vector2d(1.0, 2.0), Eigen::VectorXd(0)), 0.0);
  EXPECT_NEAR(kkt_residual(p, Eigen::Vector2d(1.5, 2.0), Eigen::VectorXd(0)), 0.5, 1e-15);
}

TEST(QpFixture, WriteReadRoundTrip) {
  std::mt19937_64 rng(17);
  const QpProblem p = oracle::random_qp(rng, 5, 7);
  std::stringstream ss;
  write_qp(ss, p);
  const QpProblem q = read_qp(ss);
  EXPECT_EQ(q.H, p.H);
  EXPECT_EQ(q.g, p.g);
  EXPECT_EQ(q.G, p.G);
  EXPECT_EQ(q.c_l, p.c_l);
  EXPECT_EQ(q.c_u, p.c_u);
  std::stringstream again;
  write_qp(again, q);
  std::stringstream first;
  write_qp(first, p);
  EXPECT_EQ(again.str(), first.str());
}

TEST(QpFixture, TruncatedInputThrows) {
  std::istringstream is("qp 2 1\nH 1 0 0 1\ng 0");
  EXPECT_THROW(read_qp(is), std::runtime_error);
}
