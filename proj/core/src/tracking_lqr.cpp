#include "layered_ocp/tracking_lqr.hpp"

#include <cmath>
#include <string>

#include "layered_ocp/errors.hpp"

namespace layered_ocp {
namespace {

void require(bool ok, const std::string &what) {
  if (!ok) throw InvalidArgument(what);
}

bool is_positive_definite(const Matrix &M) {
  if (M.rows() != M.cols()) return false;
  if (!M.isApprox(M.transpose(), 1e-12)) return false;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(M);
  return eig.eigenvalues().minCoeff() > 0.0;
}

Matrix symmetrized(const Matrix &M) { return 0.5 * (M + M.transpose()); }

}  // namespace

Matrix TrackingProblem::selector() const {
  if (output_selector) return *output_selector;
  return Matrix::Identity(state_dim(), state_dim());
}

void TrackingProblem::validate() const {
  require(!A.empty() && !B.empty() && !R.empty(), "tracking problem needs A, B and R");
  require(reference.size() >= 2, "tracking problem needs a horizon of at least one step");
  const std::size_t N = horizon();
  require(A.size() == 1 || A.size() == N, "A sequence must hold 1 or N stages");
  require(B.size() == 1 || B.size() == N, "B sequence must hold 1 or N stages");
  require(R.size() == 1 || R.size() == N, "R sequence must hold 1 or N stages");
  require(dual.size() == reference.size(), "dual and reference lengths differ");
  require(rho > 0.0 && std::isfinite(rho), "rho must be positive");

  const Eigen::Index n = state_dim();
  const Eigen::Index m = input_dim();
  const Eigen::Index q = reference_dim();
  require(initial_state.size() == n, "initial state dimension mismatch");
  for (const auto &M : A) require(M.rows() == n && M.cols() == n, "A_t must be n x n");
  for (const auto &M : B) require(M.rows() == n && M.cols() == m, "B_t must be n x m");
  for (const auto &M : R) {
    require(M.rows() == m && M.cols() == m, "R_t must be m x m");
    require(is_positive_definite(M), "R_t must be symmetric positive definite");
  }
  for (std::size_t t = 0; t <= N; ++t) {
    require(reference[t].size() == q, "reference dimensions differ");
    require(dual[t].size() == q, "dual dimension must match reference");
  }
  if (output_selector) {
    require(output_selector->rows() == q && output_selector->cols() == n,
            "output selector must be q x n");
    Eigen::FullPivLU<Matrix> lu(*output_selector);
    require(lu.rank() == q, "output selector must have full row rank");
  } else {
    require(q == n, "full-state reference must have state dimension");
  }
  if (input_proximal) {
    require(input_proximal->action.size() == N && input_proximal->dual.size() == N,
            "input proximal data must hold N entries");
    for (std::size_t t = 0; t < N; ++t) {
      require(input_proximal->action[t].size() == m && input_proximal->dual[t].size() == m,
              "input proximal dimension mismatch");
    }
  }
}

void assign_linear_dynamics(TrackingProblem &prob, const DynamicsModel &model) {
  require(model.is_linear(), "tracking LQR needs a linear model");
  prob.A.clear();
  prob.B.clear();
  if (model.linear_stages() == 1) {
    prob.A.push_back(model.A(0));
    prob.B.push_back(model.B(0));
    return;
  }
  for (std::size_t t = 0; t < prob.horizon(); ++t) {
    prob.A.push_back(model.A(t));
    prob.B.push_back(model.B(t));
  }
}

Vector AugmentedSystem::augment(const Vector &x, const VectorSeq &reference,
                                std::size_t t) const {
  const Eigen::Index n = lift.rows();
  const Eigen::Index q = lift.cols();
  Vector z = Vector::Zero(dim());
  z.head(n) = x - lift * reference[t];
  for (std::size_t j = t; j < reference.size(); ++j) {
    z.segment(n + static_cast<Eigen::Index>(j - t) * q, q) = reference[j];
  }
  return z;
}

AugmentedSystem build_augmented(const TrackingProblem &prob) {
  prob.validate();
  const std::size_t N = prob.horizon();
  const Eigen::Index n = prob.state_dim();
  const Eigen::Index m = prob.input_dim();
  const Eigen::Index q = prob.reference_dim();
  const Eigen::Index mu_dim = q * static_cast<Eigen::Index>(N + 1);
  const Eigen::Index d = n + mu_dim;
  const Matrix C = prob.selector();

  AugmentedSystem aug;
  aug.lift = prob.output_selector
                 ? Matrix(C.transpose() * (C * C.transpose()).inverse())
                 : Matrix(Matrix::Identity(n, n));

  aug.F = Matrix::Zero(n, d);
  aug.F.leftCols(n).setIdentity();
  aug.G = Matrix::Zero(mu_dim, d);
  aug.G.rightCols(mu_dim).setIdentity();

  Matrix shift = Matrix::Zero(mu_dim, mu_dim);
  shift.topRightCorner(mu_dim - q, mu_dim - q).setIdentity();

  aug.A_bar.reserve(N);
  aug.B_bar.reserve(N);
  for (std::size_t t = 0; t < N; ++t) {
    const Matrix &A = prob.A_at(t);
    Matrix Ab = Matrix::Zero(d, d);
    Ab.topLeftCorner(n, n) = A;
    // e_{t+1} = A e_t + B u_t + A L r_t - L r_{t+1}
    Ab.block(0, n, n, q) = A * aug.lift;
    Ab.block(0, n + q, n, q) = -aug.lift;
    Ab.bottomRightCorner(mu_dim, mu_dim) = shift;
    aug.A_bar.push_back(std::move(Ab));

    Matrix Bb = Matrix::Zero(d, m);
    Bb.topRows(n) = prob.B_at(t);
    aug.B_bar.push_back(std::move(Bb));
  }

  const double half_rho = 0.5 * prob.rho;
  const Matrix CF = C * aug.F;
  aug.Q_bar = half_rho * CF.transpose() * CF;

  aug.q.reserve(N + 1);
  aug.kappa.assign(N + 1, 0.0);
  for (std::size_t t = 0; t <= N; ++t) {
    aug.q.push_back(half_rho * CF.transpose() * prob.dual[t]);
    aug.kappa[t] = half_rho * prob.dual[t].squaredNorm();
  }

  aug.input_linear.assign(N, Vector::Zero(m));
  if (prob.input_proximal) {
    for (std::size_t t = 0; t < N; ++t) {
      const Vector target = prob.input_proximal->action[t] - prob.input_proximal->dual[t];
      aug.input_linear[t] = -half_rho * target;
      aug.kappa[t] += half_rho * target.squaredNorm();
    }
  }

  aug.z0 = aug.augment(prob.initial_state, prob.reference, 0);
  return aug;
}

MatrixSeq effective_input_weights(const TrackingProblem &prob) {
  MatrixSeq out;
  const std::size_t stages = prob.R.size();
  out.reserve(stages);
  for (const auto &R : prob.R) {
    if (prob.input_proximal) {
      out.push_back(R + 0.5 * prob.rho * Matrix::Identity(R.rows(), R.cols()));
    } else {
      out.push_back(R);
    }
  }
  return out;
}

RiccatiGains riccati_gains(const AugmentedSystem &aug, const MatrixSeq &R_seq) {
  const std::size_t N = aug.horizon();
  if (R_seq.size() != 1 && R_seq.size() != N) {
    throw InvalidArgument("R sequence must hold 1 or N stages");
  }
  RiccatiGains g;
  g.P.assign(N + 1, Matrix());
  g.K.assign(N, Matrix());
  g.H.resize(N);
  g.P[N] = aug.Q_bar;
  for (std::size_t k = N; k-- > 0;) {
    const Matrix &R = R_seq.size() == 1 ? R_seq.front() : R_seq[k];
    const Matrix &A = aug.A_bar[k];
    const Matrix &B = aug.B_bar[k];
    const Matrix &P_next = g.P[k + 1];
    const Matrix PB = P_next * B;
    const Matrix H = R + B.transpose() * PB;
    g.H[k].compute(H);
    if (g.H[k].info() != Eigen::Success) {
      throw NumericalError("R + B'PB is not positive definite at stage " + std::to_string(k));
    }
    g.K[k] = g.H[k].solve(PB.transpose() * A);
    if (!g.K[k].allFinite()) {
      throw NumericalError("non-finite gain at stage " + std::to_string(k));
    }
    const Matrix PA = P_next * A;
    g.P[k] = symmetrized(aug.Q_bar + A.transpose() * PA - g.K[k].transpose() * H * g.K[k]);
  }
  return g;
}

RiccatiSolution riccati_affine(const AugmentedSystem &aug, const RiccatiGains &gains) {
  const std::size_t N = aug.horizon();
  RiccatiSolution sol;
  sol.P = gains.P;
  sol.K = gains.K;
  sol.p.assign(N + 1, Vector());
  sol.c.assign(N + 1, 0.0);
  sol.nu.assign(N, Vector());
  sol.p[N] = aug.q[N];
  sol.c[N] = aug.kappa[N];
  for (std::size_t k = N; k-- > 0;) {
    const Matrix &A = aug.A_bar[k];
    const Matrix &B = aug.B_bar[k];
    const Vector g = B.transpose() * sol.p[k + 1] + aug.input_linear[k];
    sol.nu[k] = gains.H[k].solve(g);
    sol.p[k] = aug.q[k] + A.transpose() * sol.p[k + 1] - gains.K[k].transpose() * g;
    sol.c[k] = sol.c[k + 1] + aug.kappa[k] - g.dot(sol.nu[k]);
  }
  return sol;
}

RiccatiSolution solve_riccati(const AugmentedSystem &aug, const MatrixSeq &R_seq) {
  RiccatiSolution sol = riccati_affine(aug, riccati_gains(aug, R_seq));
  decompose_gains(sol, aug.F, aug.G);
  return sol;
}

std::pair<MatrixSeq, MatrixSeq> decompose_gains(RiccatiSolution &sol, const Matrix &F,
                                                const Matrix &G) {
  if (F.cols() != G.cols()) throw InvalidArgument("selectors act on different spaces");
  MatrixSeq fb;
  MatrixSeq ff;
  fb.reserve(sol.K.size());
  ff.reserve(sol.K.size());
  for (const auto &K : sol.K) {
    if (K.cols() != F.cols()) throw InvalidArgument("gain does not act on the augmented state");
    fb.push_back(K * F.transpose());
    ff.push_back(K * G.transpose());
  }
  sol.K_fb = fb;
  sol.K_ff = ff;
  return {std::move(fb), std::move(ff)};
}

double tracking_objective(const TrackingProblem &prob, const Trajectory &traj) {
  const std::size_t N = prob.horizon();
  if (traj.states.size() != N + 1 || traj.inputs.size() != N) {
    throw InvalidArgument("trajectory length does not match the tracking horizon");
  }
  const Matrix C = prob.selector();
  const double half_rho = 0.5 * prob.rho;
  double total = 0.0;
  for (std::size_t t = 0; t <= N; ++t) {
    total += half_rho * (C * traj.states[t] - prob.reference[t] + prob.dual[t]).squaredNorm();
  }
  for (std::size_t t = 0; t < N; ++t) {
    const Vector &u = traj.inputs[t];
    total += u.dot(prob.R_at(t) * u);
    if (prob.input_proximal) {
      total += half_rho *
               (u - prob.input_proximal->action[t] + prob.input_proximal->dual[t]).squaredNorm();
    }
  }
  return total;
}

TrackingSolution solve_tracking(const TrackingProblem &prob, const RiccatiGains *cached_gains) {
  const AugmentedSystem aug = build_augmented(prob);
  const std::size_t N = prob.horizon();

  TrackingSolution out;
  if (cached_gains) {
    if (cached_gains->K.size() != N) throw InvalidArgument("cached gains have the wrong horizon");
    out.riccati = riccati_affine(aug, *cached_gains);
  } else {
    out.riccati = riccati_affine(aug, riccati_gains(aug, effective_input_weights(prob)));
  }
  decompose_gains(out.riccati, aug.F, aug.G);
  out.z0 = aug.z0;

  Trajectory &traj = out.trajectory;
  traj.states.reserve(N + 1);
  traj.inputs.reserve(N);
  traj.states.push_back(prob.initial_state);
  for (std::size_t t = 0; t < N; ++t) {
    const Vector z = aug.augment(traj.states[t], prob.reference, t);
    Vector u = -out.riccati.K[t] * z - out.riccati.nu[t];
    Vector next = prob.A_at(t) * traj.states[t] + prob.B_at(t) * u;
    check_divergence(next, t + 1);
    traj.inputs.push_back(std::move(u));
    traj.states.push_back(std::move(next));
  }
  out.objective = tracking_objective(prob, traj);
  return out;
}

MatrixSeq lqr_gain(const MatrixSeq &A, const MatrixSeq &B, const Matrix &C_x, const Matrix &R,
                   std::size_t horizon) {
  require(!A.empty() && !B.empty(), "lqr_gain needs dynamics");
  require(A.size() == 1 || A.size() == horizon, "A sequence must hold 1 or N stages");
  require(B.size() == 1 || B.size() == horizon, "B sequence must hold 1 or N stages");
  const Eigen::Index n = A.front().rows();
  const Eigen::Index m = B.front().cols();
  require(C_x.rows() == n && C_x.cols() == n, "C_x must be n x n");
  require(R.rows() == m && R.cols() == m, "R must be m x m");
  require(C_x.isApprox(C_x.transpose(), 1e-12), "C_x must be symmetric");
  {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(C_x);
    require(eig.eigenvalues().minCoeff() >= -1e-12, "C_x must be positive semidefinite");
  }
  require(is_positive_definite(R), "R must be positive definite");

  MatrixSeq K(horizon);
  Matrix P = C_x;
  for (std::size_t k = horizon; k-- > 0;) {
    const Matrix &At = A.size() == 1 ? A.front() : A[k];
    const Matrix &Bt = B.size() == 1 ? B.front() : B[k];
    const Matrix PB = P * Bt;
    const Matrix H = R + Bt.transpose() * PB;
    Eigen::LLT<Matrix> llt(H);
    if (llt.info() != Eigen::Success) throw NumericalError("LQR Hessian not positive definite");
    K[k] = llt.solve(PB.transpose() * At);
    P = symmetrized(C_x + At.transpose() * P * At - K[k].transpose() * H * K[k]);
  }
  return K;
}

}  // namespace layered_ocp
