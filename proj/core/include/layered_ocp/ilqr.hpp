#pragma once

#include <optional>
#include <vector>

#include "layered_ocp/dynamics.hpp"
#include "layered_ocp/types.hpp"

namespace layered_ocp {

struct StageExpansion {
  Vector lx;
  Vector lu;
  Matrix lxx;
  Matrix luu;
  Matrix lux;
};

struct TerminalExpansion {
  Vector lx;
  Matrix lxx;
};

/// Stage costs l_t(x, u), t < N, and terminal cost l_N(x) with exact
/// first and second derivatives.
class IlqrCost {
 public:
  virtual ~IlqrCost() = default;

  virtual std::size_t horizon() const = 0;
  virtual double stage(std::size_t t, const Vector &x, const Vector &u) const = 0;
  virtual double terminal(const Vector &x) const = 0;
  virtual StageExpansion stage_expansion(std::size_t t, const Vector &x, const Vector &u) const = 0;
  virtual TerminalExpansion terminal_expansion(const Vector &x) const = 0;

  double total(const Trajectory &traj) const;
};

/// l_t = (Sx - y_t)'W_t(Sx - y_t) + u'R_t u + (u - b_t)'M_t(u - b_t)
/// l_N = (Sx - y_N)'W_N(Sx - y_N)
///
/// Covers both the feedback-layer subproblem (S = C, y = r - v, W = M =
/// (rho/2)I, b = a - v_a) and goal-reaching baselines (y = goal).
class QuadraticCost final : public IlqrCost {
 public:
  QuadraticCost(Matrix selector, VectorSeq targets, MatrixSeq state_weights, MatrixSeq input_weights);

  /// Adds the (u - b_t)'M_t(u - b_t) term; M and b hold N entries.
  void set_input_proximal(VectorSeq input_targets, MatrixSeq input_prox_weights);

  std::size_t horizon() const override { return targets_.size() - 1; }
  double stage(std::size_t t, const Vector &x, const Vector &u) const override;
  double terminal(const Vector &x) const override;
  StageExpansion stage_expansion(std::size_t t, const Vector &x, const Vector &u) const override;
  TerminalExpansion terminal_expansion(const Vector &x) const override;

  /// ADMM feedback-layer cost (rho/2)||Cx - r + v||^2 + u'Ru [+ (rho/2)||u - a + v_a||^2].
  static QuadraticCost tracking(const Matrix &selector, const VectorSeq &reference,
                                const VectorSeq &dual, double rho, const MatrixSeq &R,
                                const VectorSeq *action = nullptr,
                                const VectorSeq *action_dual = nullptr);

  /// Goal-reaching cost with weight Q for t < N and Q_N at t = N.
  static QuadraticCost goal(const Matrix &selector, const Vector &goal, const Matrix &Q,
                            const Matrix &Q_terminal, const Matrix &R, std::size_t horizon);

 private:
  const Matrix &weight(std::size_t t) const {
    return state_weights_.size() == 1 ? state_weights_.front() : state_weights_[t];
  }
  const Matrix &input_weight(std::size_t t) const {
    return input_weights_.size() == 1 ? input_weights_.front() : input_weights_[t];
  }

  Matrix selector_;
  VectorSeq targets_;        // N+1
  MatrixSeq state_weights_;  // 1 or N+1
  MatrixSeq input_weights_;  // 1 or N
  VectorSeq prox_targets_;   // empty or N
  MatrixSeq prox_weights_;   // empty or N
};

struct IlqrOptions {
  int max_iters = 200;
  double tol = 1e-6;  // relative cost decrease
  double reg_init = 1e-6;
  double reg_factor = 10.0;
  double reg_min = 1e-12;
  double reg_max = 1e10;
  int max_backtracks = 10;  // step sizes 1, 1/2, ..., 2^-10
};

struct IlqrResult {
  Trajectory trajectory;
  MatrixSeq feedback;     // K_t, u = u_bar + alpha k_t + K_t (x - x_bar)
  VectorSeq feedforward;  // k_t
  int iterations_used = 0;
  bool converged = false;
  double cost = 0.0;
  std::vector<double> cost_history;  // accepted costs, starting with the initial rollout
};

/// Gauss-Newton iLQR with Levenberg regularization on the input Hessian and a
/// backtracking line search that accepts only strict cost decrease.
/// Throws DivergenceError when the initial rollout diverges.
IlqrResult ilqr_solve(const DynamicsModel &model, const IlqrCost &cost, const Vector &x0,
                      const VectorSeq &u_init, const IlqrOptions &options = {});

}  // namespace layered_ocp
