#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "layered_ocp/errors.hpp"
#include "layered_ocp/ilqr.hpp"
#include "layered_ocp/tracking_lqr.hpp"

namespace {

using namespace layered_ocp;

Matrix rnd(std::mt19937_64 &rng, Eigen::Index r, Eigen::Index c) {
  std::normal_distribution<double> g;
  return Matrix::NullaryExpr(r, c, [&] { return g(rng); });
}

struct LinearCase {
  TrackingProblem prob;
  DynamicsModel model;
};

LinearCase linear_case(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Eigen::Index n = 3, m = 2;
  const std::size_t N = 10;
  TrackingProblem p;
  p.A = {Matrix::Identity(n, n) + 0.1 * rnd(rng, n, n)};
  p.B = {rnd(rng, n, m)};
  p.R = {0.3 * Matrix::Identity(m, m)};
  for (std::size_t t = 0; t <= N; ++t) {
    p.reference.push_back(rnd(rng, n, 1));
    p.dual.push_back(0.2 * rnd(rng, n, 1));
  }
  p.rho = 5.0;
  p.initial_state = rnd(rng, n, 1);
  return {p, make_linear(p.A[0], p.B[0])};
}

QuadraticCost tracking_cost(const TrackingProblem &p) {
  return QuadraticCost::tracking(p.selector(), p.reference, p.dual, p.rho, p.R);
}

TEST(Ilqr, LinearQuadraticOneIteration) {
  const auto [p, model] = linear_case(31);
  const auto exact = solve_tracking(p);
  IlqrOptions opt;
  opt.max_iters = 1;
  const auto res = ilqr_solve(model, tracking_cost(p), p.initial_state,
                              VectorSeq(p.horizon(), Vector::Zero(2)), opt);
  EXPECT_EQ(res.iterations_used, 1);
  EXPECT_LT(std::abs(res.cost - exact.objective) / std::abs(exact.objective), 1e-8);
  EXPECT_LT(stacked_distance(res.trajectory.inputs, exact.trajectory.inputs), 1e-5);
}

TEST(Ilqr, OptimalStartIsFixedPoint) {
  const auto [p, model] = linear_case(32);
  const auto exact = solve_tracking(p);
  const auto res = ilqr_solve(model, tracking_cost(p), p.initial_state, exact.trajectory.inputs);
  EXPECT_TRUE(res.converged);
  EXPECT_EQ(res.iterations_used, 1);
  EXPECT_LE(res.cost, res.cost_history.front());
  EXPECT_LT(std::abs(res.cost - exact.objective), 1e-9 * std::abs(exact.objective));
}

TEST(Ilqr, CartpoleNearUpright) {
  const auto model = make_cartpole();
  Vector goal(4);
  goal << 0, M_PI, 0, 0;
  // 1.5 s; over longer horizons the zero-input Euler rollout spins the pole
  const std::size_t N = 15;
  const auto cost = QuadraticCost::goal(Matrix::Identity(4, 4), goal, 0.1 * Matrix::Identity(4, 4),
                                        1000 * Matrix::Identity(4, 4),
                                        0.01 * Matrix::Identity(1, 1), N);
  Vector x0 = goal;
  x0[1] += 0.1;
  IlqrOptions opt;
  opt.max_iters = 50;
  const auto res = ilqr_solve(model, cost, x0, VectorSeq(N, Vector::Zero(1)), opt);
  EXPECT_LE(res.iterations_used, 50);
  EXPECT_LT(std::abs(res.trajectory.states.back()[1] - M_PI), 0.05);
}

TEST(Ilqr, CostNeverIncreasesAndTrajectoryFeasible) {
  const auto model = make_unicycle();
  Vector goal(3);
  goal << 3, 2, 0;
  Matrix S = Matrix::Zero(2, 3);
  S.leftCols(2).setIdentity();
  const std::size_t N = 20;
  const auto cost = QuadraticCost::goal(S, goal.head(2), 0.1 * Matrix::Identity(2, 2),
                                        1000 * Matrix::Identity(2, 2),
                                        0.01 * Matrix::Identity(2, 2), N);
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 5; ++trial) {
    const Vector x0 = rnd(rng, 3, 1);
    const auto res = ilqr_solve(model, cost, x0, VectorSeq(N, Vector::Zero(2)));
    for (std::size_t i = 1; i < res.cost_history.size(); ++i) {
      EXPECT_LT(res.cost_history[i], res.cost_history[i - 1]);
    }
    EXPECT_TRUE(is_dynamically_feasible(model, res.trajectory));
    EXPECT_DOUBLE_EQ(res.cost, cost.total(res.trajectory));
    EXPECT_LE(res.iterations_used, 200);
  }
}

TEST(Ilqr, DivergentInitialRolloutThrows) {
  const auto model = make_linear(Matrix::Identity(1, 1) * 50.0, Matrix::Identity(1, 1));
  const auto cost = QuadraticCost::goal(Matrix::Identity(1, 1), Vector::Zero(1),
                                        Matrix::Identity(1, 1), Matrix::Identity(1, 1),
                                        Matrix::Identity(1, 1), 10);
  EXPECT_THROW(ilqr_solve(model, cost, Vector::Ones(1), VectorSeq(10, Vector::Zero(1))),
               DivergenceError);
}

TEST(QuadraticCost, DerivativesMatchFiniteDifferences) {
  std::mt19937_64 rng(34);
  const Eigen::Index n = 4, m = 2;
  const std::size_t N = 3;
  const Matrix S = rnd(rng, 3, n);
  VectorSeq y, b;
  MatrixSeq W, R, M;
  for (std::size_t t = 0; t <= N; ++t) {
    y.push_back(rnd(rng, 3, 1));
    const Matrix L = rnd(rng, 3, 3);
    W.push_back(L * L.transpose());
  }
  for (std::size_t t = 0; t < N; ++t) {
    const Matrix L = rnd(rng, m, m);
    R.push_back(L * L.transpose() + Matrix::Identity(m, m));
    M.push_back(0.5 * Matrix::Identity(m, m));
    b.push_back(rnd(rng, m, 1));
  }
  QuadraticCost cost(S, y, W, R);
  cost.set_input_proximal(b, M);
  const double h = 1e-5;
  for (std::size_t t = 0; t < N; ++t) {
    const Vector x = rnd(rng, n, 1);
    const Vector u = rnd(rng, m, 1);
    const auto ex = cost.stage_expansion(t, x, u);
    for (Eigen::Index i = 0; i < n; ++i) {
      Vector e = Vector::Zero(n);
      e[i] = h;
      const double g = (cost.stage(t, x + e, u) - cost.stage(t, x - e, u)) / (2 * h);
      EXPECT_NEAR(g, ex.lx[i], 1e-4 * std::max(1.0, std::abs(g)));
      const Vector dg = (cost.stage_expansion(t, x + e, u).lx - cost.stage_expansion(t, x - e, u).lx) / (2 * h);
      EXPECT_LT((dg - ex.lxx.col(i)).norm(), 1e-4 * std::max(1.0, dg.norm()));
      const Vector dgu = (cost.stage_expansion(t, x + e, u).lu - cost.stage_expansion(t, x - e, u).lu) / (2 * h);
      EXPECT_LT((dgu - ex.lux.col(i)).norm(), 1e-4 * std::max(1.0, dgu.norm()));
    }
    for (Eigen::Index i = 0; i < m; ++i) {
      Vector e = Vector::Zero(m);
      e[i] = h;
      const double g = (cost.stage(t, x, u + e) - cost.stage(t, x, u - e)) / (2 * h);
      EXPECT_NEAR(g, ex.lu[i], 1e-4 * std::max(1.0, std::abs(g)));
      const Vector dg = (cost.stage_expansion(t, x, u + e).lu - cost.stage_expansion(t, x, u - e).lu) / (2 * h);
      EXPECT_LT((dg - ex.luu.col(i)).norm(), 1e-4 * std::max(1.0, dg.norm()));
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(ex.luu);
    EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
  }
  const Vector x = rnd(rng, n, 1);
  const auto term = cost.terminal_expansion(x);
  for (Eigen::Index i = 0; i < n; ++i) {
    Vector e = Vector::Zero(n);
    e[i] = h;
    const double g = (cost.terminal(x + e) - cost.terminal(x - e)) / (2 * h);
    EXPECT_NEAR(g, term.lx[i], 1e-4 * std::max(1.0, std::abs(g)));
  }
}

TEST(QuadraticCost, TrackingMatchesSubproblemObjective) {
  const auto [p, model] = linear_case(35);
  const auto traj = rollout(model, p.initial_state, VectorSeq(p.horizon(), Vector::Ones(2)));
  EXPECT_NEAR(tracking_cost(p).total(traj), tracking_objective(p, traj), 1e-9);
}

}  // namespace
