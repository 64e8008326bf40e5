#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "layered_ocp/errors.hpp"
#include "layered_ocp/traj_opt.hpp"
#include "layered_ocp/verify/oracles.hpp"

namespace {

using namespace layered_ocp;

Vector v2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

const ObstacleRect kRect{1.0, 0.5, 1.5, 1.0, 0, 1};

ReferenceCost single_stage(const Matrix &Q, const Vector &s) {
  return ReferenceCost{{Q}, {s}, {}};
}

TEST(ProxReference, UnconstrainedClosedForm) {
  const auto cost = single_stage(Matrix::Identity(2, 2), Vector::Zero(2));
  const auto r = prox_reference(cost, {v2(4, 2)}, 2.0, ConstraintSpec{});
  EXPECT_DOUBLE_EQ(r[0][0], 2.0);
  EXPECT_DOUBLE_EQ(r[0][1], 1.0);
}

TEST(ProxReference, PureProjectionOntoBox) {
  const auto cost = single_stage(Matrix::Zero(2, 2), Vector::Zero(2));
  const double inf = std::numeric_limits<double>::infinity();
  const ConstraintSpec box{{Box{v2(0, -inf), v2(1, inf)}}};
  const auto r = prox_reference(cost, {v2(1.7, 0.3)}, 1.0, box);
  EXPECT_EQ(r[0], v2(1.0, 0.3));
}

TEST(ProxReference, EmptyBoxNamesStage) {
  const auto cost = ReferenceCost::goal(Matrix::Identity(1, 1), Matrix::Identity(1, 1),
                                        Vector::Zero(1), 2);
  ConstraintSpec spec = ConstraintSpec::unconstrained(2);
  spec.stages[2] = Box{Vector::Constant(1, 1.0), Vector::Constant(1, 0.0)};
  try {
    prox_reference(cost, VectorSeq(3, Vector::Zero(1)), 1.0, spec);
    FAIL() << "expected infeasibility";
  } catch (const InfeasibleError &e) {
    EXPECT_EQ(e.timestep(), 2u);
  }
}

TEST(ProxReference, DiagonalBoxMatchesGrid) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> U(-2, 2), W(0, 3);
  const double h = 1e-3;
  for (int i = 0; i < 20; ++i) {
    Matrix Q = Matrix::Zero(2, 2);
    Q.diagonal() << W(rng), W(rng);
    const Vector s = v2(U(rng), U(rng));
    const Vector anchor = v2(U(rng), U(rng));
    const double rho = 0.5 + W(rng);
    const Box box{v2(-0.5, -0.25), v2(0.5, 0.75)};
    const auto cost = single_stage(Q, s);
    const Vector r = prox_stage(cost, 0, anchor, rho, box);
    ASSERT_TRUE(satisfies(StageConstraint{box}, r));
    double best = std::numeric_limits<double>::infinity();
    for (double a = -0.5; a <= 0.5 + 1e-12; a += h)
      for (double b = -0.25; b <= 0.75 + 1e-12; b += h)
        best = std::min(best, prox_objective(cost, 0, anchor, rho, v2(a, b)));
    const double mine = prox_objective(cost, 0, anchor, rho, r);
    EXPECT_LE(mine, best + 1e-12);
    EXPECT_GT(mine, best - 10 * h);
  }
}

TEST(ProxReference, NonDiagonalBoxSatisfiesKkt) {
  std::mt19937_64 rng(22);
  std::normal_distribution<double> g;
  for (int i = 0; i < 50; ++i) {
    Matrix L = Matrix::NullaryExpr(3, 3, [&] { return g(rng); });
    const Matrix Q = L * L.transpose();
    const Vector s = Vector::NullaryExpr(3, [&] { return g(rng); });
    const Vector anchor = Vector::NullaryExpr(3, [&] { return 2 * g(rng); });
    const double rho = 1.5;
    const Box box{Vector::Constant(3, -0.5), Vector::Constant(3, 0.5)};
    const Vector r = prox_stage(single_stage(Q, s), 0, anchor, rho, box);
    // objective as 0.5 r'Hr - b'r
    const Matrix H = 2 * Q + rho * Matrix::Identity(3, 3);
    const Vector b = 2 * Q * s + rho * anchor;
    EXPECT_LE(box_qp_kkt_residual(H, b, box.lower, box.upper, r), 1e-8);
  }
}

TEST(ProxReference, SeparableEqualsJointOracle) {
  // joint box-free problem over all stages as one dense quadratic
  std::mt19937_64 rng(23);
  std::normal_distribution<double> g;
  const std::size_t N = 6;
  VectorSeq s, anchor;
  for (std::size_t t = 0; t <= N; ++t) {
    s.push_back(Vector::NullaryExpr(2, [&] { return g(rng); }));
    anchor.push_back(Vector::NullaryExpr(2, [&] { return g(rng); }));
  }
  const auto cost = ReferenceCost::tracking(0.7 * Matrix::Identity(2, 2), s);
  const double rho = 3.0;
  const auto r = prox_reference(cost, anchor, rho, ConstraintSpec::unconstrained(N));
  const Eigen::Index d = 2 * Eigen::Index(N + 1);
  Matrix H = Matrix::Zero(d, d);
  Vector b = Vector::Zero(d);
  for (std::size_t t = 0; t <= N; ++t) {
    const Eigen::Index o = 2 * Eigen::Index(t);
    H.block(o, o, 2, 2) = 2 * cost.weights[t] + rho * Matrix::Identity(2, 2);
    b.segment(o, 2) = 2 * cost.weights[t] * s[t] + rho * anchor[t];
  }
  const Vector joint = H.fullPivLu().solve(b);
  EXPECT_LT((stack(r) - joint).norm(), 1e-8);
}

TEST(ProxReference, ProjectionIsNonexpansive) {
  std::mt19937_64 rng(24);
  std::normal_distribution<double> g;
  const auto cost = single_stage(Matrix::Zero(2, 2), Vector::Zero(2));
  const Box box{v2(-1, 0), v2(0.5, 2)};
  for (int i = 0; i < 200; ++i) {
    const Vector a1 = v2(2 * g(rng), 2 * g(rng));
    const Vector a2 = v2(2 * g(rng), 2 * g(rng));
    const Vector r1 = prox_stage(cost, 0, a1, 1.0, box);
    const Vector r2 = prox_stage(cost, 0, a2, 1.0, box);
    EXPECT_LE((r1 - r2).norm(), (a1 - a2).norm() + 1e-15);
  }
}

TEST(Corridor, OddHorizonFirstHalfTakesCeil) {
  const Box a{v2(0, 0), v2(1, 1)};
  const Box b{v2(2, 2), v2(3, 3)};
  const auto spec = ConstraintSpec::switching(5, a, b);
  ASSERT_EQ(spec.stages.size(), 6u);
  int first = 0;
  for (const auto &c : spec.stages) first += std::get<Box>(c).lower[0] == 0.0;
  EXPECT_EQ(first, 3);
}

TEST(Obstacle, OutsideAnchorUnchanged) {
  const Vector a = v2(2.0, 0.2);
  EXPECT_EQ(prox_obstacle(a, Matrix::Zero(2, 2), Vector::Zero(2), 1.0, kRect), a);
}

TEST(Obstacle, NearestFaceLeft) {
  const Vector r = prox_obstacle(v2(1.1, 0.75), Matrix::Zero(2, 2), Vector::Zero(2), 1.0, kRect);
  EXPECT_EQ(r, v2(1.0, 0.75));
}

TEST(Obstacle, CenterTieTakesLeft) {
  // all four faces are 0.25 away
  const Vector r = prox_obstacle(v2(1.25, 0.75), Matrix::Zero(2, 2), Vector::Zero(2), 1.0, kRect);
  EXPECT_EQ(r, v2(1.0, 0.75));
}

TEST(Obstacle, BoundaryIsFeasible) {
  EXPECT_TRUE(satisfies(StageConstraint{kRect}, v2(1.0, 0.75)));
  EXPECT_TRUE(satisfies(StageConstraint{kRect}, v2(1.2, 1.0)));
  EXPECT_FALSE(satisfies(StageConstraint{kRect}, v2(1.2, 0.99999999)));
}

TEST(Obstacle, MatchesGridOracle) {
  std::mt19937_64 rng(25);
  std::uniform_real_distribution<double> U(0.5, 2.0), W(0.0, 2.0);
  for (int i = 0; i < 10; ++i) {
    Matrix Q = Matrix::Zero(2, 2);
    Q.diagonal() << W(rng), W(rng);
    const auto cost = single_stage(Q, v2(3, 2));
    const Vector anchor = v2(U(rng), U(rng) - 0.5);
    const double rho = 25.0;
    const Vector r = prox_stage(cost, 0, anchor, rho, kRect);
    ASSERT_TRUE(satisfies(StageConstraint{kRect}, r));
    const auto grid = verify::grid_search_obstacle(cost, 0, anchor, rho, kRect);
    EXPECT_LE(prox_objective(cost, 0, anchor, rho, r), grid.value + 1e-12);
  }
}

TEST(ProxInput, Clips) {
  const auto a = prox_input({v2(9, -3)}, 7.0);
  EXPECT_EQ(a[0], v2(7, -3));
}

TEST(ProxInput, InsideIsIdentity) {
  const VectorSeq u{v2(1, -2), v2(6.9, -7)};
  const auto a = prox_input(u, 7.0);
  EXPECT_EQ(a[0], u[0]);
  EXPECT_EQ(a[1], u[1]);
}

TEST(ProxInput, MatchesScalarGrid) {
  std::mt19937_64 rng(26);
  std::normal_distribution<double> g;
  for (int i = 0; i < 100; ++i) {
    const double w = 10 * g(rng);
    const double a = prox_input({Vector::Constant(1, w)}, 7.0)[0][0];
    EXPECT_LE(std::abs(a), 7.0);
    double best = 0, best_val = std::numeric_limits<double>::infinity();
    for (double x = -7; x <= 7 + 1e-12; x += 1e-3) {
      if ((x - w) * (x - w) < best_val) {
        best_val = (x - w) * (x - w);
        best = x;
      }
    }
    EXPECT_NEAR(a, best, 1e-3);
  }
}

TEST(BoxQp, InteriorSolutionIsUnconstrained) {
  Matrix H(2, 2);
  H << 2, 0.5, 0.5, 1;
  const Vector b = v2(0.1, -0.2);
  const Vector x = solve_box_qp(H, b, v2(-10, -10), v2(10, 10));
  EXPECT_LT((x - H.ldlt().solve(b)).norm(), 1e-14);
}

}  // namespace
