#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "layered_ocp/dynamics.hpp"
#include "layered_ocp/ilqr.hpp"
#include "layered_ocp/tracking_lqr.hpp"
#include "layered_ocp/traj_opt.hpp"
#include "layered_ocp/types.hpp"

namespace layered_ocp {

/// min C_x(r) + C_u(u)  s.t.  r_t in R_t, x_{t+1} = f(x_t, u_t), x_0 = xi, r = Cx,
/// optionally with u = a, a_t in U.
struct LayeredProblem {
  DynamicsModel model;
  ReferenceCost cost;
  MatrixSeq R;  // input weights, 1 or N entries
  ConstraintSpec constraints;
  std::optional<InputBox> input_bounds;
  std::size_t horizon = 0;
  Vector initial_state;
  std::optional<Matrix> output_selector;
  std::optional<NoiseModel> noise;

  Matrix selector() const;
  Eigen::Index reference_dim() const;
  const Matrix &R_at(std::size_t t) const { return R.size() == 1 ? R.front() : R.at(t); }
  void validate() const;

  /// C_x(Cx) + sum u'R u at a trajectory.
  double objective(const Trajectory &traj) const;
};

struct AdmmConfig {
  double rho0 = 1.0;
  double mu = 10.0;
  double tau_incr = 2.0;
  double tau_decr = 2.0;
  bool adapt_rho = true;
  double rho_min = 1e-6;
  double rho_max = 1e6;
  double eps_primal = 1e-2;  // bound on the squared primal residual
  double eps_dual = 1e-1;
  int max_outer = 200;
  int max_inner = 10;
  bool warm_start = false;  // track r^0 once before the first reference update
  double inner_tol = 1e-6;
  std::uint64_t seed = 0;

  void validate() const;
};

/// One outer iteration of the loop.
struct IterationRecord {
  int outer = 0;
  double primal = 0.0;     // ||Cx - r|| (stacked with ||u - a||)
  double dual = 0.0;       // rho ||r - r_prev|| (stacked with the action change)
  double rho = 0.0;        // penalty used during this iteration
  double dual_step = 0.0;  // ||v^k - v^{k-1}|| before any rescaling
  int inner_iterations = 0;
  bool inner_converged = true;
  double objective = 0.0;
};

struct AdmmState {
  VectorSeq r;
  Trajectory x;  // states and inputs
  VectorSeq v;
  VectorSeq a;    // empty unless input constrained
  VectorSeq v_a;  // empty unless input constrained
  double rho = 1.0;
  int k = 0;
  std::vector<double> primal_history;
  std::vector<double> dual_history;
  std::vector<int> inner_iterations;
};

/// Plan (r, x^d, u^d) plus the gain schedule of the last feedback-layer solve
/// and, for stochastic problems, the LQR gains acting on x - x^d.
struct LayeredPolicy {
  VectorSeq reference;
  Trajectory plan;
  MatrixSeq K_fb;
  MatrixSeq K_ff;   // empty for nonlinear models
  VectorSeq nu;     // empty for nonlinear models
  Matrix lift;      // e_t = x_t - lift r_t
  MatrixSeq K_lqr;  // empty unless stochastic

  /// u^d_t - K_lqr_t (x - x^d_t); the plan input when K_lqr is empty.
  Vector action(std::size_t t, const Vector &x) const;

  /// -K_fb e_t - K_ff mu_t - nu_t (linear models), the tracking law itself.
  Vector tracking_law(std::size_t t, const Vector &x) const;
};

struct AdmmDiagnostics {
  std::vector<IterationRecord> iterations;
  bool converged = false;
  int outer_iterations = 0;
  int warm_start_iterations = 0;
  int total_iterations = 0;  // sum_k (1 + i_k) plus the warm start
  double objective = 0.0;
  std::optional<std::string> failure;
};

struct AdmmResult {
  AdmmState state;
  LayeredPolicy policy;
  AdmmDiagnostics diagnostics;
};

/// Runs trajectory-generation / feedback-control / dual updates until the
/// squared primal residual and the dual residual meet their tolerances.
/// Feedback-layer divergence is reported in diagnostics.failure.
AdmmResult admm_solve(const LayeredProblem &prob, const AdmmConfig &cfg);

struct RhoUpdate {
  double rho = 1.0;
  double rescale = 1.0;  // multiply scaled duals by this
};

RhoUpdate update_rho(double rho, double primal_res, double dual_res, double mu, double tau_incr,
                     double tau_decr);

struct Residuals {
  double primal = 0.0;
  double dual = 0.0;
};

/// primal = ||Cx - r||, dual = rho ||r - r_prev||.
Residuals residuals(const AdmmState &state, const VectorSeq &r_prev, const Matrix &selector);

/// Deterministic plan by ADMM, stochastic deviation regulated by finite-horizon
/// LQR on (A, B, C_x, R). Needs a linear model and a time-invariant weight.
AdmmResult solve_stochastic(const LayeredProblem &prob, const AdmmConfig &cfg);

/// Closed-loop simulation of a policy, with optional seeded process noise.
Trajectory simulate_policy(const DynamicsModel &model, const LayeredPolicy &policy,
                           const Vector &x0, const std::optional<NoiseModel> &noise,
                           std::uint64_t seed);

/// sum_k (1 + i_k).
int iteration_count(const std::vector<int> &inner_iterations);

/// Straight line from `from` to `to` over N+1 points.
VectorSeq interpolate(const Vector &from, const Vector &to, std::size_t horizon);

}  // namespace layered_ocp
