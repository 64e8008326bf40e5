#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "layered_ocp/errors.hpp"
#include "layered_ocp/tracking_lqr.hpp"
#include "layered_ocp/verify/oracles.hpp"

namespace {

using namespace layered_ocp;

TrackingProblem scalar_problem(std::size_t N) {
  TrackingProblem p;
  p.A = {Matrix::Identity(1, 1)};
  p.B = {Matrix::Identity(1, 1)};
  p.R = {Matrix::Identity(1, 1)};
  p.reference = VectorSeq(N + 1, Vector::Zero(1));
  p.dual = VectorSeq(N + 1, Vector::Zero(1));
  p.rho = 2.0;
  p.initial_state = Vector::Constant(1, 1.0);
  return p;
}

Matrix rnd(std::mt19937_64 &rng, Eigen::Index r, Eigen::Index c) {
  std::normal_distribution<double> g;
  return Matrix::NullaryExpr(r, c, [&] { return g(rng); });
}

TrackingProblem random_ltv(std::mt19937_64 &rng, Eigen::Index n, Eigen::Index m, std::size_t N) {
  TrackingProblem p;
  for (std::size_t t = 0; t < N; ++t) {
    p.A.push_back(Matrix::Identity(n, n) + 0.2 * rnd(rng, n, n));
    p.B.push_back(rnd(rng, n, m));
    const Matrix L = rnd(rng, m, m);
    p.R.push_back(L * L.transpose() + 0.5 * Matrix::Identity(m, m));
  }
  for (std::size_t t = 0; t <= N; ++t) {
    p.reference.push_back(rnd(rng, n, 1));
    p.dual.push_back(0.3 * rnd(rng, n, 1));
  }
  p.rho = 3.0;
  p.initial_state = rnd(rng, n, 1);
  return p;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

double traj_gap(const Trajectory &a, const Trajectory &b) {
  return stacked_distance(a.states, b.states) + stacked_distance(a.inputs, b.inputs);
}

TEST(TrackingProblem, ValidateRejectsBadData) {
  auto p = scalar_problem(3);
  p.rho = 0.0;
  EXPECT_THROW(p.validate(), InvalidArgument);
  p = scalar_problem(3);
  p.R = {-Matrix::Identity(1, 1)};
  EXPECT_THROW(p.validate(), InvalidArgument);
  p = scalar_problem(3);
  p.dual.pop_back();
  EXPECT_THROW(p.validate(), InvalidArgument);
}

TEST(Augmented, SelectorsPartitionIdentity) {
  std::mt19937_64 rng(1);
  const auto aug = build_augmented(random_ltv(rng, 3, 2, 6));
  const Matrix I = Matrix::Identity(aug.dim(), aug.dim());
  EXPECT_EQ(aug.F.transpose() * aug.F + aug.G.transpose() * aug.G, I);
  EXPECT_EQ(aug.F * aug.G.transpose(), Matrix::Zero(aug.F.rows(), aug.G.rows()));
}

TEST(Augmented, InitialStateSelectors) {
  std::mt19937_64 rng(2);
  const auto p = random_ltv(rng, 2, 1, 5);
  const auto aug = build_augmented(p);
  EXPECT_EQ(aug.F * aug.z0, (p.initial_state - p.reference[0]).eval());
  EXPECT_EQ(aug.G * aug.z0, stack(p.reference));
}

TEST(Augmented, ZeroReferenceKeepsDynamics) {
  auto p = scalar_problem(4);
  p.A = {Matrix::Constant(1, 1, 1.3)};
  p.B = {Matrix::Constant(1, 1, 0.7)};
  const auto aug = build_augmented(p);
  for (std::size_t t = 0; t < 4; ++t) {
    EXPECT_EQ((aug.F * aug.A_bar[t] * aug.F.transpose())(0, 0), 1.3);
    EXPECT_EQ((aug.F * aug.B_bar[t])(0, 0), 0.7);
    EXPECT_EQ(aug.q[t], Vector::Zero(aug.dim()));
  }
}

TEST(Augmented, ErrorComponentTracksRollout) {
  std::mt19937_64 rng(3);
  const auto p = random_ltv(rng, 3, 2, 7);
  const auto aug = build_augmented(p);
  Vector x = p.initial_state;
  Vector z = aug.z0;
  for (std::size_t t = 0; t < 7; ++t) {
    const Vector u = rnd(rng, 2, 1);
    x = p.A[t] * x + p.B[t] * u;
    z = aug.A_bar[t] * z + aug.B_bar[t] * u;
    EXPECT_LT(((aug.F * z) - (x - p.reference[t + 1])).norm(), 1e-12);
  }
}

TEST(Riccati, ScalarOneStep) {
  const auto p = scalar_problem(1);
  const auto aug = build_augmented(p);
  const auto sol = solve_riccati(aug, p.R);
  EXPECT_NEAR((aug.F * sol.P[0] * aug.F.transpose())(0, 0), 1.5, 1e-15);
}

TEST(Riccati, HomogeneousHasNoAffineTerms) {
  auto p = scalar_problem(5);
  p.A = {Matrix::Constant(1, 1, 1.1)};
  const auto sol = solve_riccati(build_augmented(p), p.R);
  for (const auto &pt : sol.p) EXPECT_EQ(pt.norm(), 0.0);
  for (const auto &nt : sol.nu) EXPECT_EQ(nt.norm(), 0.0);
}

TEST(Riccati, PIsSymmetricPsd) {
  std::mt19937_64 rng(4);
  const auto p = random_ltv(rng, 3, 2, 8);
  const auto sol = solve_riccati(build_augmented(p), p.R);
  for (const auto &P : sol.P) {
    EXPECT_EQ(P, P.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> es(P);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-9);
  }
}

TEST(Riccati, PIndependentOfDual) {
  std::mt19937_64 rng(5);
  auto p = random_ltv(rng, 2, 2, 6);
  const auto a = solve_riccati(build_augmented(p), p.R);
  for (auto &v : p.dual) v = rnd(rng, 2, 1);
  const auto b = solve_riccati(build_augmented(p), p.R);
  for (std::size_t t = 0; t < a.P.size(); ++t) EXPECT_EQ(a.P[t], b.P[t]);
}

TEST(Riccati, OffsetLinearInDual) {
  std::mt19937_64 rng(6);
  auto p = random_ltv(rng, 3, 1, 6);
  auto nu_for = [&](double scale, const VectorSeq &v) {
    auto q = p;
    for (std::size_t t = 0; t < v.size(); ++t) q.dual[t] = scale * v[t];
    return solve_riccati(build_augmented(q), q.R).nu;
  };
  const VectorSeq v = p.dual;
  const auto n0 = nu_for(0.0, v);
  const auto n1 = nu_for(1.0, v);
  const auto n2 = nu_for(2.0, v);
  for (std::size_t t = 0; t < n0.size(); ++t) {
    const Vector d1 = n1[t] - n0[t];
    const Vector d2 = n2[t] - n0[t];
    EXPECT_LT((d2 - 2.0 * d1).norm(), 1e-9 * std::max(1.0, d2.norm()));
  }
}

TEST(Decompose, ZeroGainGivesZeroParts) {
  RiccatiSolution sol;
  sol.K = {Matrix::Zero(1, 5)};
  Matrix F = Matrix::Zero(2, 5);
  F.leftCols(2).setIdentity();
  Matrix G = Matrix::Zero(3, 5);
  G.rightCols(3).setIdentity();
  const auto [fb, ff] = decompose_gains(sol, F, G);
  EXPECT_EQ(fb[0].norm(), 0.0);
  EXPECT_EQ(ff[0].norm(), 0.0);
}

TEST(Decompose, ReconstructsGainExactly) {
  std::mt19937_64 rng(7);
  const auto p = random_ltv(rng, 3, 2, 5);
  const auto aug = build_augmented(p);
  auto sol = solve_riccati(aug, p.R);
  decompose_gains(sol, aug.F, aug.G);
  for (std::size_t t = 0; t < sol.K.size(); ++t) {
    EXPECT_EQ(sol.K_fb[t] * aug.F + sol.K_ff[t] * aug.G, sol.K[t]);
  }
}

TEST(Decompose, FeedbackMatchesClassicLqr) {
  std::mt19937_64 rng(8);
  auto p = random_ltv(rng, 2, 1, 6);
  for (auto &r : p.reference) r.setZero();
  for (auto &v : p.dual) v.setZero();
  const auto aug = build_augmented(p);
  auto sol = solve_riccati(aug, p.R);
  decompose_gains(sol, aug.F, aug.G);
  // textbook backward recursion on (A_t, B_t, (rho/2) I, R_t)
  const Matrix Q = 0.5 * p.rho * Matrix::Identity(2, 2);
  Matrix P = Q;
  for (std::size_t t = 6; t-- > 0;) {
    const Matrix &A = p.A[t];
    const Matrix &B = p.B[t];
    const Matrix K = (p.R[t] + B.transpose() * P * B).ldlt().solve(B.transpose() * P * A);
    EXPECT_LT((sol.K_fb[t] - K).norm(), 1e-10);
    P = Q + A.transpose() * P * (A - B * K);
    P = 0.5 * (P + P.transpose()).eval();
  }
}

TEST(SolveTracking, EquilibriumReference) {
  TrackingProblem p;
  p.A = {Matrix::Identity(2, 2)};
  p.B = {Matrix::Identity(2, 2)};
  p.R = {Matrix::Identity(2, 2)};
  Vector xi(2);
  xi << 0.4, -1.2;
  p.reference = VectorSeq(6, xi);
  p.dual = VectorSeq(6, Vector::Zero(2));
  p.initial_state = xi;
  const auto s = solve_tracking(p);
  for (const auto &u : s.trajectory.inputs) EXPECT_LT(u.norm(), 1e-15);
  for (const auto &x : s.trajectory.states) EXPECT_LT((x - xi).norm(), 1e-15);
  EXPECT_LT(std::abs(s.objective), 1e-28);
}

TEST(SolveTracking, MatchesDenseOracle) {
  std::mt19937_64 rng(9);
  const auto p = random_ltv(rng, 3, 2, 8);
  const auto s = solve_tracking(p);
  const auto oracle = verify::solve_kkt(verify::dense_from_tracking(p));
  EXPECT_LT(rel(s.objective, oracle.objective), 1e-6);
  EXPECT_LT(traj_gap(s.trajectory, oracle.trajectory), 1e-6);
  EXPECT_LT(rel(s.riccati.value(s.z0), s.objective), 1e-8);
  EXPECT_NEAR(s.objective, tracking_objective(p, s.trajectory), 1e-12 * std::abs(s.objective));
}

TEST(SolveTracking, LowOrderDoubleIntegrator) {
  TrackingProblem p;
  Matrix A(4, 4);
  A << 1, 0, 0.1, 0, 0, 1, 0, 0.1, 0, 0, 1, 0, 0, 0, 0, 1;
  Matrix B = Matrix::Zero(4, 2);
  B.bottomRows(2).setIdentity();
  p.A = {A};
  p.B = {B};
  p.R = {0.01 * Matrix::Identity(2, 2)};
  Matrix C = Matrix::Zero(2, 4);
  C.leftCols(2).setIdentity();
  p.output_selector = C;
  const std::size_t N = 12;
  for (std::size_t t = 0; t <= N; ++t) {
    Vector r(2);
    r << std::cos(0.3 * t), std::sin(0.3 * t);
    p.reference.push_back(r);
    p.dual.push_back(0.1 * r);
  }
  p.rho = 4.0;
  p.initial_state = Vector::Zero(4);
  const auto s = solve_tracking(p);
  const auto oracle = verify::solve_kkt(verify::dense_from_tracking(p));
  EXPECT_LT(rel(s.objective, oracle.objective), 1e-6);
  EXPECT_LT(traj_gap(s.trajectory, oracle.trajectory), 1e-6);
  EXPECT_LT(rel(s.riccati.value(s.z0), s.objective), 1e-8);
}

TEST(SolveTracking, InputProximalMatchesOracle) {
  std::mt19937_64 rng(10);
  auto p = random_ltv(rng, 2, 2, 7);
  InputProximal prox;
  for (std::size_t t = 0; t < 7; ++t) {
    prox.action.push_back(rnd(rng, 2, 1));
    prox.dual.push_back(0.2 * rnd(rng, 2, 1));
  }
  p.input_proximal = prox;
  const auto s = solve_tracking(p);
  const auto oracle = verify::solve_kkt(verify::dense_from_tracking(p));
  EXPECT_LT(rel(s.objective, oracle.objective), 1e-6);
  EXPECT_LT(traj_gap(s.trajectory, oracle.trajectory), 1e-6);
}

TEST(SolveTracking, CachedGainsGiveSameSolution) {
  std::mt19937_64 rng(12);
  auto p = random_ltv(rng, 3, 1, 10);
  const auto gains = riccati_gains(build_augmented(p), effective_input_weights(p));
  for (auto &v : p.dual) v = rnd(rng, 3, 1);
  const auto fresh = solve_tracking(p);
  const auto cached = solve_tracking(p, &gains);
  EXPECT_EQ(traj_gap(fresh.trajectory, cached.trajectory), 0.0);
}

TEST(LqrGain, ZeroInputMatrix) {
  const auto K = lqr_gain({Matrix::Identity(2, 2)}, {Matrix::Zero(2, 1)}, Matrix::Identity(2, 2),
                          Matrix::Identity(1, 1), 4);
  ASSERT_EQ(K.size(), 4u);
  for (const auto &k : K) EXPECT_EQ(k.norm(), 0.0);
}

TEST(LqrGain, ScalarOneStep) {
  const Matrix one = Matrix::Identity(1, 1);
  const auto K = lqr_gain({one}, {one}, one, one, 1);
  EXPECT_DOUBLE_EQ(K[0](0, 0), 0.5);
}

TEST(LqrGain, IndefiniteWeightThrows) {
  const Matrix one = Matrix::Identity(1, 1);
  EXPECT_THROW(lqr_gain({one}, {one}, -one, one, 3), InvalidArgument);
}

}  // namespace
