#include "layered_ocp/ilqr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "layered_ocp/errors.hpp"

namespace layered_ocp {

double IlqrCost::total(const Trajectory &traj) const {
  double J = 0.0;
  for (std::size_t t = 0; t < traj.inputs.size(); ++t) {
    J += stage(t, traj.states[t], traj.inputs[t]);
  }
  return J + terminal(traj.states.back());
}

QuadraticCost::QuadraticCost(Matrix selector, VectorSeq targets, MatrixSeq state_weights,
                             MatrixSeq input_weights)
    : selector_(std::move(selector)),
      targets_(std::move(targets)),
      state_weights_(std::move(state_weights)),
      input_weights_(std::move(input_weights)) {
  if (targets_.size() < 2) throw InvalidArgument("cost horizon must be at least one step");
  const std::size_t N = horizon();
  if (state_weights_.size() != 1 && state_weights_.size() != N + 1) {
    throw InvalidArgument("state weights must hold 1 or N+1 entries");
  }
  if (input_weights_.size() != 1 && input_weights_.size() != N) {
    throw InvalidArgument("input weights must hold 1 or N entries");
  }
  for (const auto &y : targets_) {
    if (y.size() != selector_.rows()) throw InvalidArgument("cost target dimension mismatch");
  }
}

void QuadraticCost::set_input_proximal(VectorSeq input_targets, MatrixSeq input_prox_weights) {
  if (input_targets.size() != horizon() || input_prox_weights.size() != horizon()) {
    throw InvalidArgument("input proximal data must hold N entries");
  }
  prox_targets_ = std::move(input_targets);
  prox_weights_ = std::move(input_prox_weights);
}

double QuadraticCost::stage(std::size_t t, const Vector &x, const Vector &u) const {
  const Vector e = selector_ * x - targets_[t];
  double J = e.dot(weight(t) * e) + u.dot(input_weight(t) * u);
  if (!prox_targets_.empty()) {
    const Vector d = u - prox_targets_[t];
    J += d.dot(prox_weights_[t] * d);
  }
  return J;
}

double QuadraticCost::terminal(const Vector &x) const {
  const std::size_t N = horizon();
  const Vector e = selector_ * x - targets_[N];
  return e.dot(weight(N) * e);
}

StageExpansion QuadraticCost::stage_expansion(std::size_t t, const Vector &x,
                                              const Vector &u) const {
  const Matrix &W = weight(t);
  const Matrix &R = input_weight(t);
  const Matrix SW = selector_.transpose() * (W + W.transpose());
  StageExpansion ex;
  ex.lx = SW * (selector_ * x - targets_[t]);
  ex.lxx = SW * selector_;
  ex.lu = (R + R.transpose()) * u;
  ex.luu = R + R.transpose();
  if (!prox_targets_.empty()) {
    const Matrix &M = prox_weights_[t];
    ex.lu += (M + M.transpose()) * (u - prox_targets_[t]);
    ex.luu += M + M.transpose();
  }
  ex.lux = Matrix::Zero(u.size(), x.size());
  return ex;
}

TerminalExpansion QuadraticCost::terminal_expansion(const Vector &x) const {
  const std::size_t N = horizon();
  const Matrix &W = weight(N);
  const Matrix SW = selector_.transpose() * (W + W.transpose());
  return {SW * (selector_ * x - targets_[N]), SW * selector_};
}

QuadraticCost QuadraticCost::tracking(const Matrix &selector, const VectorSeq &reference,
                                      const VectorSeq &dual, double rho, const MatrixSeq &R,
                                      const VectorSeq *action, const VectorSeq *action_dual) {
  if (reference.size() != dual.size()) throw InvalidArgument("reference and dual lengths differ");
  VectorSeq targets(reference.size());
  for (std::size_t t = 0; t < reference.size(); ++t) targets[t] = reference[t] - dual[t];
  const Eigen::Index q = selector.rows();
  QuadraticCost cost(selector, std::move(targets),
                     MatrixSeq{0.5 * rho * Matrix::Identity(q, q)}, R);
  if (action != nullptr) {
    if (action_dual == nullptr || action->size() != action_dual->size()) {
      throw InvalidArgument("action and action dual must be given together");
    }
    const std::size_t N = action->size();
    VectorSeq b(N);
    MatrixSeq M(N);
    for (std::size_t t = 0; t < N; ++t) {
      b[t] = (*action)[t] - (*action_dual)[t];
      M[t] = 0.5 * rho * Matrix::Identity(b[t].size(), b[t].size());
    }
    cost.set_input_proximal(std::move(b), std::move(M));
  }
  return cost;
}

QuadraticCost QuadraticCost::goal(const Matrix &selector, const Vector &goal, const Matrix &Q,
                                  const Matrix &Q_terminal, const Matrix &R, std::size_t horizon) {
  MatrixSeq weights(horizon + 1, Q);
  weights[horizon] = Q_terminal;
  return QuadraticCost(selector, VectorSeq(horizon + 1, goal), std::move(weights), MatrixSeq{R});
}

namespace {

struct BackwardPass {
  MatrixSeq K;
  VectorSeq k;
  double dV1 = 0.0;  // linear term of the expected change, sum k'Q_u
  double dV2 = 0.0;  // quadratic term, sum 0.5 k'Q_uu k
};

bool backward_pass(const DynamicsModel &model, const IlqrCost &cost, const Trajectory &traj,
                   double reg, BackwardPass &out) {
  const std::size_t N = traj.inputs.size();
  out.K.assign(N, Matrix());
  out.k.assign(N, Vector());
  out.dV1 = 0.0;
  out.dV2 = 0.0;

  TerminalExpansion term = cost.terminal_expansion(traj.states[N]);
  Vector Vx = term.lx;
  Matrix Vxx = term.lxx;

  for (std::size_t t = N; t-- > 0;) {
    const Linearization lin = model.linearize(traj.states[t], traj.inputs[t], t);
    const StageExpansion ex = cost.stage_expansion(t, traj.states[t], traj.inputs[t]);

    const Vector Qx = ex.lx + lin.A.transpose() * Vx;
    const Vector Qu = ex.lu + lin.B.transpose() * Vx;
    const Matrix VxxA = Vxx * lin.A;
    const Matrix VxxB = Vxx * lin.B;
    const Matrix Qxx = ex.lxx + lin.A.transpose() * VxxA;
    const Matrix Quu = ex.luu + lin.B.transpose() * VxxB;
    const Matrix Qux = ex.lux + lin.B.transpose() * VxxA;

    Matrix Quu_reg = 0.5 * (Quu + Quu.transpose());
    Quu_reg.diagonal().array() += reg;
    Eigen::LLT<Matrix> llt(Quu_reg);
    if (llt.info() != Eigen::Success) return false;

    out.k[t] = -llt.solve(Qu);
    out.K[t] = -llt.solve(Qux);
    if (!out.k[t].allFinite() || !out.K[t].allFinite()) return false;

    const Vector &k = out.k[t];
    const Matrix &K = out.K[t];
    out.dV1 += k.dot(Qu);
    out.dV2 += 0.5 * k.dot(Quu * k);

    Vx = Qx + K.transpose() * Quu * k + K.transpose() * Qu + Qux.transpose() * k;
    Vxx = Qxx + K.transpose() * Quu * K + K.transpose() * Qux + Qux.transpose() * K;
    Vxx = 0.5 * (Vxx + Vxx.transpose());
  }
  return true;
}

// Returns false when the candidate diverges.
bool forward_pass(const DynamicsModel &model, const Trajectory &nominal, const BackwardPass &bp,
                  double alpha, Trajectory &out) {
  const std::size_t N = nominal.inputs.size();
  out.states.resize(N + 1);
  out.inputs.resize(N);
  out.states[0] = nominal.states[0];
  for (std::size_t t = 0; t < N; ++t) {
    out.inputs[t] = nominal.inputs[t] + alpha * bp.k[t] +
                    bp.K[t] * (out.states[t] - nominal.states[t]);
    out.states[t + 1] = model.step(out.states[t], out.inputs[t], t);
    const Vector &x = out.states[t + 1];
    if (!x.allFinite() || x.cwiseAbs().maxCoeff() > kDivergenceBound) return false;
  }
  return true;
}

}  // namespace

IlqrResult ilqr_solve(const DynamicsModel &model, const IlqrCost &cost, const Vector &x0,
                      const VectorSeq &u_init, const IlqrOptions &options) {
  if (options.max_iters < 1) throw InvalidArgument("iLQR needs max_iters >= 1");
  if (u_init.size() != cost.horizon()) {
    throw InvalidArgument("initial input sequence length " + std::to_string(u_init.size()) +
                          " does not match cost horizon " + std::to_string(cost.horizon()));
  }

  IlqrResult result;
  result.trajectory = rollout(model, x0, u_init);
  double J = cost.total(result.trajectory);
  if (!std::isfinite(J)) throw NumericalError("initial iLQR cost is not finite");
  result.cost_history.push_back(J);

  double reg = options.reg_init;
  BackwardPass bp;
  Trajectory candidate;

  for (int it = 1; it <= options.max_iters; ++it) {
    result.iterations_used = it;

    bool ok = backward_pass(model, cost, result.trajectory, reg, bp);
    while (!ok) {
      reg *= options.reg_factor;
      if (reg > options.reg_max) break;
      ok = backward_pass(model, cost, result.trajectory, reg, bp);
    }
    if (!ok) break;
    result.feedback = bp.K;
    result.feedforward = bp.k;

    const double scale = std::max(std::abs(J), std::numeric_limits<double>::min());
    const double expected = -(bp.dV1 + bp.dV2);
    if (expected < options.tol * scale) {
      result.converged = true;
      break;
    }

    bool accepted = false;
    double alpha = 1.0;
    for (int ls = 0; ls <= options.max_backtracks; ++ls, alpha *= 0.5) {
      if (!forward_pass(model, result.trajectory, bp, alpha, candidate)) continue;
      const double J_new = cost.total(candidate);
      if (std::isfinite(J_new) && J_new < J) {
        const double rel = (J - J_new) / scale;
        std::swap(result.trajectory, candidate);
        J = J_new;
        result.cost_history.push_back(J);
        accepted = true;
        if (rel < options.tol) result.converged = true;
        break;
      }
    }

    if (accepted) {
      reg = std::max(reg / options.reg_factor, options.reg_min);
      if (result.converged) break;
    } else {
      reg *= options.reg_factor;
      if (reg > options.reg_max) break;
    }
  }

  result.cost = J;
  return result;
}

}  // namespace layered_ocp
