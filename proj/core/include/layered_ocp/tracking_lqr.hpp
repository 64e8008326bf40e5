#pragma once

#include <optional>
#include <vector>

#include "layered_ocp/dynamics.hpp"
#include "layered_ocp/types.hpp"

namespace layered_ocp {

/// Redundant action variable a_t and its scaled dual v_{a,t}; adds
/// (rho/2)||u_t - a_t + v_{a,t}||^2 to each stage cost.
struct InputProximal {
  VectorSeq action;
  VectorSeq dual;
};

/// Feedback-layer subproblem for linear dynamics:
///
///   min  sum_{t=0}^{N} (rho/2)||C x_t - r_t + v_t||^2 + sum_{t<N} u_t' R_t u_t
///   s.t. x_{t+1} = A_t x_t + B_t u_t,  x_0 = xi
///
/// C defaults to the identity. A, B and R hold either N stages or a single
/// time-invariant stage.
struct TrackingProblem {
  MatrixSeq A;
  MatrixSeq B;
  MatrixSeq R;
  VectorSeq reference;  // N+1 entries
  VectorSeq dual;       // N+1 entries
  double rho = 1.0;
  Vector initial_state;
  std::optional<Matrix> output_selector;
  std::optional<InputProximal> input_proximal;

  std::size_t horizon() const { return reference.empty() ? 0 : reference.size() - 1; }
  Eigen::Index state_dim() const { return A.front().rows(); }
  Eigen::Index input_dim() const { return B.front().cols(); }
  Eigen::Index reference_dim() const { return reference.front().size(); }

  const Matrix &A_at(std::size_t t) const { return A.size() == 1 ? A.front() : A.at(t); }
  const Matrix &B_at(std::size_t t) const { return B.size() == 1 ? B.front() : B.at(t); }
  const Matrix &R_at(std::size_t t) const { return R.size() == 1 ? R.front() : R.at(t); }
  /// C, or the identity when no selector is set.
  Matrix selector() const;

  /// Throws InvalidArgument on shape errors, rho <= 0 or non-PD R_t.
  void validate() const;
};

/// Fills A and B from a linear model over the problem horizon.
void assign_linear_dynamics(TrackingProblem &prob, const DynamicsModel &model);

/// The tracking problem rewritten over z_t = (e_t, mu_t), where
/// e_t = x_t - L r_t with L = C'(CC')^{-1} (the identity for full-state
/// references) and mu_t = (r_t, ..., r_N, 0, ..., 0). F and G select e and mu.
///
/// Stage cost: z'Qz + 2 q_t'z + u'R_t u + 2 s_t'u + kappa_t, where
/// Q = (rho/2) F'C'CF and q_t = (rho/2) F'C'v_t.
struct AugmentedSystem {
  MatrixSeq A_bar;  // N
  MatrixSeq B_bar;  // N
  Matrix Q_bar;
  VectorSeq q;                 // N+1
  VectorSeq input_linear;      // s_t, N
  std::vector<double> kappa;   // N+1 stage constants
  Matrix F;
  Matrix G;
  Matrix lift;  // L
  Vector z0;

  std::size_t horizon() const { return A_bar.size(); }
  Eigen::Index dim() const { return F.cols(); }

  /// Augmented state for physical state x at stage t.
  Vector augment(const Vector &x, const VectorSeq &reference, std::size_t t) const;
};

AugmentedSystem build_augmented(const TrackingProblem &prob);

/// Value function V_t(z) = z'P_t z + 2 p_t'z + c_t and the law u = -K_t z - nu_t.
struct RiccatiSolution {
  MatrixSeq P;             // N+1
  VectorSeq p;             // N+1
  std::vector<double> c;   // N+1
  MatrixSeq K;             // N
  VectorSeq nu;            // N
  MatrixSeq K_fb;          // N, acts on e_t
  MatrixSeq K_ff;          // N, acts on mu_t

  double value(const Vector &z, std::size_t t = 0) const {
    return z.dot(P[t] * z) + 2.0 * p[t].dot(z) + c[t];
  }
};

/// The quadratic part of the recursion, which depends only on (A_bar, B_bar, Q, R).
struct RiccatiGains {
  MatrixSeq P;  // N+1
  MatrixSeq K;  // N
  std::vector<Eigen::LLT<Matrix>> H;  // factorizations of R_t + B'P_{t+1}B
};

/// Input weights of the subproblem: R_t, plus (rho/2)I under an input proximal term.
MatrixSeq effective_input_weights(const TrackingProblem &prob);

RiccatiGains riccati_gains(const AugmentedSystem &aug, const MatrixSeq &R_seq);

/// Completes the recursion (p_t, c_t, nu_t) for given gains.
RiccatiSolution riccati_affine(const AugmentedSystem &aug, const RiccatiGains &gains);

/// Backward recursion from P_N = Q, p_N = q_N, c_N = kappa_N. R_seq may hold a
/// single time-invariant weight.
RiccatiSolution solve_riccati(const AugmentedSystem &aug, const MatrixSeq &R_seq);

/// K_fb = K F', K_ff = K G'. Also stores them into sol.
std::pair<MatrixSeq, MatrixSeq> decompose_gains(RiccatiSolution &sol, const Matrix &F,
                                                const Matrix &G);

struct TrackingSolution {
  Trajectory trajectory;
  RiccatiSolution riccati;
  Vector z0;
  double objective = 0.0;
};

/// Solves the subproblem by simulating u_t = -K_t z_t - nu_t in closed loop
/// through the original dynamics. When gains are supplied they are reused.
TrackingSolution solve_tracking(const TrackingProblem &prob,
                                const RiccatiGains *cached_gains = nullptr);

/// Objective of the subproblem evaluated at a trajectory.
double tracking_objective(const TrackingProblem &prob, const Trajectory &traj);

/// Finite-horizon LQR with stage and terminal state weight C_x. Returns K_t,
/// t = 0..N-1, for the law u = -K_t x. A and B may be single or per stage.
MatrixSeq lqr_gain(const MatrixSeq &A, const MatrixSeq &B, const Matrix &C_x, const Matrix &R,
                   std::size_t horizon);

}  // namespace layered_ocp
