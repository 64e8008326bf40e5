#include "layered_ocp/traj_opt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "layered_ocp/errors.hpp"

namespace layered_ocp {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool is_diagonal(const Matrix &M) {
  for (Eigen::Index j = 0; j < M.cols(); ++j) {
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
      if (i != j && M(i, j) != 0.0) return false;
    }
  }
  return true;
}

// Stage subproblem as min 0.5 r'Hr - b'r.
struct StageQp {
  Matrix H;
  Vector b;
};

StageQp stage_qp(const Matrix &Q, const Vector &target, const Vector *linear, const Vector &anchor,
                 double rho) {
  const Eigen::Index q = target.size();
  StageQp qp;
  qp.H = 2.0 * Q + rho * Matrix::Identity(q, q);
  qp.b = 2.0 * Q * target + rho * anchor;
  if (linear != nullptr) qp.b -= *linear;
  return qp;
}

Vector clip(const Vector &x, const Vector &lower, const Vector &upper) {
  return x.cwiseMax(lower).cwiseMin(upper);
}

Vector solve_bounded(const StageQp &qp, const Vector &lower, const Vector &upper) {
  if (is_diagonal(qp.H)) {
    const Vector unconstrained = qp.b.cwiseQuotient(qp.H.diagonal());
    return clip(unconstrained, lower, upper);
  }
  return solve_box_qp(qp.H, qp.b, lower, upper);
}

double qp_value(const StageQp &qp, const Vector &r) { return 0.5 * r.dot(qp.H * r) - qp.b.dot(r); }

void check_rect(const ObstacleRect &rect, Eigen::Index q) {
  if (rect.x_index < 0 || rect.x_index >= q || rect.y_index < 0 || rect.y_index >= q ||
      rect.x_index == rect.y_index) {
    throw InvalidArgument("obstacle coordinates out of range");
  }
  if (!(rect.x_min < rect.x_max) || !(rect.y_min < rect.y_max)) {
    throw InvalidArgument("obstacle rectangle must have positive extent");
  }
}

// Enumerates left, right, bottom, top; strict comparison keeps the earlier one on ties.
Vector solve_outside_rect(const StageQp &qp, const ObstacleRect &rect) {
  const Eigen::Index q = qp.b.size();
  check_rect(rect, q);
  struct HalfSpace {
    Eigen::Index index;
    double lower;
    double upper;
  };
  const HalfSpace candidates[4] = {
      {rect.x_index, -kInf, rect.x_min},
      {rect.x_index, rect.x_max, kInf},
      {rect.y_index, -kInf, rect.y_min},
      {rect.y_index, rect.y_max, kInf},
  };
  Vector best;
  double best_value = kInf;
  for (const auto &hs : candidates) {
    Vector lower = Vector::Constant(q, -kInf);
    Vector upper = Vector::Constant(q, kInf);
    lower[hs.index] = hs.lower;
    upper[hs.index] = hs.upper;
    Vector r = solve_bounded(qp, lower, upper);
    const double value = qp_value(qp, r);
    if (value < best_value) {
      best_value = value;
      best = std::move(r);
    }
  }
  return best;
}

}  // namespace

double ReferenceCost::stage(std::size_t t, const Vector &r) const {
  const Vector e = r - targets[t];
  double v = e.dot(weights[t] * e);
  if (!linear.empty()) v += linear[t].dot(r);
  return v;
}

double ReferenceCost::evaluate(const VectorSeq &r) const {
  if (r.size() != targets.size()) throw InvalidArgument("reference length mismatch");
  double total = 0.0;
  for (std::size_t t = 0; t < r.size(); ++t) total += stage(t, r[t]);
  return total;
}

void ReferenceCost::validate() const {
  if (targets.size() < 2) throw InvalidArgument("reference cost needs at least two stages");
  if (weights.size() != targets.size()) throw InvalidArgument("one weight per stage required");
  if (!linear.empty() && linear.size() != targets.size()) {
    throw InvalidArgument("linear terms must cover every stage");
  }
  const Eigen::Index q = dim();
  for (std::size_t t = 0; t < targets.size(); ++t) {
    if (targets[t].size() != q || weights[t].rows() != q || weights[t].cols() != q) {
      throw InvalidArgument("reference cost dimensions differ at stage " + std::to_string(t));
    }
    if (!linear.empty() && linear[t].size() != q) {
      throw InvalidArgument("linear term dimension mismatch at stage " + std::to_string(t));
    }
    if (!weights[t].isApprox(weights[t].transpose(), 1e-12)) {
      throw InvalidArgument("reference weight must be symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(weights[t]);
    if (eig.eigenvalues().minCoeff() < -1e-12) {
      throw InvalidArgument("reference weight must be positive semidefinite");
    }
  }
}

ReferenceCost ReferenceCost::goal(const Matrix &Q, const Matrix &Q_terminal, const Vector &goal,
                                  std::size_t horizon) {
  ReferenceCost cost;
  cost.weights.assign(horizon + 1, Q);
  cost.weights[horizon] = Q_terminal;
  cost.targets.assign(horizon + 1, goal);
  return cost;
}

ReferenceCost ReferenceCost::tracking(const Matrix &Q, VectorSeq targets) {
  ReferenceCost cost;
  cost.weights.assign(targets.size(), Q);
  cost.targets = std::move(targets);
  return cost;
}

const StageConstraint &ConstraintSpec::at(std::size_t t) const {
  static const StageConstraint kFree = Unconstrained{};
  return stages.empty() ? kFree : stages.at(t);
}

ConstraintSpec ConstraintSpec::unconstrained(std::size_t horizon) {
  return uniform(horizon, Unconstrained{});
}

ConstraintSpec ConstraintSpec::switching(std::size_t horizon, const StageConstraint &first,
                                         const StageConstraint &second) {
  ConstraintSpec spec;
  const std::size_t split = (horizon + 1) / 2;
  for (std::size_t t = 0; t <= horizon; ++t) spec.stages.push_back(t < split ? first : second);
  return spec;
}

ConstraintSpec ConstraintSpec::uniform(std::size_t horizon, const StageConstraint &c) {
  ConstraintSpec spec;
  spec.stages.assign(horizon + 1, c);
  return spec;
}

InputBox InputBox::symmetric(const Vector &bound) {
  if ((bound.array() <= 0.0).any()) throw InvalidArgument("input bounds must be positive");
  return {-bound, bound};
}

bool satisfies(const StageConstraint &c, const Vector &r) {
  if (const auto *box = std::get_if<Box>(&c)) {
    return (r.array() >= box->lower.array()).all() && (r.array() <= box->upper.array()).all();
  }
  if (const auto *rect = std::get_if<ObstacleRect>(&c)) {
    const double x = r[rect->x_index];
    const double y = r[rect->y_index];
    const bool inside = x > rect->x_min && x < rect->x_max && y > rect->y_min && y < rect->y_max;
    return !inside;
  }
  return true;
}

bool satisfies(const ConstraintSpec &spec, const VectorSeq &r) {
  for (std::size_t t = 0; t < r.size(); ++t) {
    if (!satisfies(spec.at(t), r[t])) return false;
  }
  return true;
}

double prox_objective(const ReferenceCost &cost, std::size_t t, const Vector &anchor, double rho,
                      const Vector &r) {
  return cost.stage(t, r) + 0.5 * rho * (anchor - r).squaredNorm();
}

Vector prox_obstacle(const Vector &anchor, const Matrix &Q, const Vector &target, double rho,
                     const ObstacleRect &rect) {
  return solve_outside_rect(stage_qp(Q, target, nullptr, anchor, rho), rect);
}

Vector prox_stage(const ReferenceCost &cost, std::size_t t, const Vector &anchor, double rho,
                  const StageConstraint &c) {
  const Vector *linear = cost.linear.empty() ? nullptr : &cost.linear[t];
  const StageQp qp = stage_qp(cost.weights[t], cost.targets[t], linear, anchor, rho);

  if (const auto *box = std::get_if<Box>(&c)) {
    if (box->lower.size() != anchor.size() || box->upper.size() != anchor.size()) {
      throw InvalidArgument("box dimension mismatch at stage " + std::to_string(t));
    }
    if ((box->lower.array() > box->upper.array()).any()) {
      throw InfeasibleError("empty box constraint", t);
    }
    return solve_bounded(qp, box->lower, box->upper);
  }
  if (const auto *rect = std::get_if<ObstacleRect>(&c)) {
    if (rect->x_index >= anchor.size() || rect->y_index >= anchor.size()) {
      throw InvalidArgument("obstacle coordinates out of range at stage " + std::to_string(t));
    }
    return solve_outside_rect(qp, *rect);
  }
  return qp.H.ldlt().solve(qp.b);
}

VectorSeq prox_reference(const ReferenceCost &cost, const VectorSeq &anchor, double rho,
                         const ConstraintSpec &cons) {
  if (!(rho > 0.0)) throw InvalidArgument("rho must be positive");
  if (anchor.size() != cost.targets.size()) {
    throw InvalidArgument("anchor must have N+1 entries");
  }
  if (!cons.empty() && cons.stages.size() != anchor.size()) {
    throw InvalidArgument("constraint spec must have N+1 entries");
  }
  VectorSeq r(anchor.size());
  for (std::size_t t = 0; t < anchor.size(); ++t) {
    if (anchor[t].size() != cost.dim()) throw InvalidArgument("anchor dimension mismatch");
    r[t] = prox_stage(cost, t, anchor[t], rho, cons.at(t));
  }
  return r;
}

VectorSeq prox_input(const VectorSeq &u_plus_dual, const InputBox &box) {
  VectorSeq a;
  a.reserve(u_plus_dual.size());
  for (const auto &w : u_plus_dual) {
    if (w.size() != box.lower.size() || w.size() != box.upper.size()) {
      throw InvalidArgument("input bound dimension mismatch");
    }
    a.push_back(clip(w, box.lower, box.upper));
  }
  return a;
}

VectorSeq prox_input(const VectorSeq &u_plus_dual, double bound) {
  if (!(bound > 0.0)) throw InvalidArgument("input bound must be positive");
  if (u_plus_dual.empty()) return {};
  const Eigen::Index m = u_plus_dual.front().size();
  return prox_input(u_plus_dual, InputBox::symmetric(Vector::Constant(m, bound)));
}

Vector solve_box_qp(const Matrix &H, const Vector &b, const Vector &lower, const Vector &upper) {
  const Eigen::Index d = b.size();
  if (H.rows() != d || H.cols() != d || lower.size() != d || upper.size() != d) {
    throw InvalidArgument("box QP dimension mismatch");
  }
  if ((lower.array() > upper.array()).any()) throw InfeasibleError("empty box", 0);

  // 0 free, -1 fixed at lower, +1 fixed at upper
  std::vector<int> state(static_cast<std::size_t>(d), 0);
  Vector x = clip(H.ldlt().solve(b), lower, upper);
  for (Eigen::Index i = 0; i < d; ++i) {
    if (x[i] == lower[i]) state[i] = -1;
    else if (x[i] == upper[i]) state[i] = 1;
  }

  const int max_iter = static_cast<int>(10 * (d + 1) * (d + 1));
  for (int iter = 0; iter < max_iter; ++iter) {
    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < d; ++i) {
      if (state[i] == 0) free.push_back(i);
    }

    Vector target = x;
    if (!free.empty()) {
      const Eigen::Index nf = static_cast<Eigen::Index>(free.size());
      Matrix Hff(nf, nf);
      Vector rhs(nf);
      for (Eigen::Index a = 0; a < nf; ++a) {
        rhs[a] = b[free[a]];
        for (Eigen::Index j = 0; j < d; ++j) {
          if (state[j] != 0) rhs[a] -= H(free[a], j) * x[j];
        }
        for (Eigen::Index c = 0; c < nf; ++c) Hff(a, c) = H(free[a], free[c]);
      }
      const Vector sol = Hff.ldlt().solve(rhs);
      for (Eigen::Index a = 0; a < nf; ++a) target[free[a]] = sol[a];
    }

    const Vector p = target - x;
    if (p.cwiseAbs().maxCoeff() <= 1e-14 * (1.0 + x.cwiseAbs().maxCoeff())) {
      x = target;
      const Vector g = H * x - b;
      Eigen::Index worst = -1;
      double worst_mult = -1e-12 * (1.0 + g.cwiseAbs().maxCoeff());
      for (Eigen::Index i = 0; i < d; ++i) {
        if (state[i] == 0) continue;
        const double mult = state[i] < 0 ? g[i] : -g[i];
        if (mult < worst_mult) {
          worst_mult = mult;
          worst = i;
        }
      }
      if (worst < 0) return x;
      state[worst] = 0;
      continue;
    }

    double alpha = 1.0;
    Eigen::Index blocking = -1;
    int blocking_side = 0;
    for (Eigen::Index i : free) {
      if (p[i] < 0.0 && std::isfinite(lower[i])) {
        const double a = (lower[i] - x[i]) / p[i];
        if (a < alpha) {
          alpha = a;
          blocking = i;
          blocking_side = -1;
        }
      } else if (p[i] > 0.0 && std::isfinite(upper[i])) {
        const double a = (upper[i] - x[i]) / p[i];
        if (a < alpha) {
          alpha = a;
          blocking = i;
          blocking_side = 1;
        }
      }
    }
    x += alpha * p;
    if (blocking >= 0) {
      x[blocking] = blocking_side < 0 ? lower[blocking] : upper[blocking];
      state[blocking] = blocking_side;
    }
    x = clip(x, lower, upper);
  }
  throw NumericalError("box QP active-set iteration limit reached");
}

double box_qp_kkt_residual(const Matrix &H, const Vector &b, const Vector &lower,
                           const Vector &upper, const Vector &x) {
  const Vector g = H * x - b;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    worst = std::max({worst, lower[i] - x[i], x[i] - upper[i]});
    const bool at_lower = x[i] == lower[i];
    const bool at_upper = x[i] == upper[i];
    if (at_lower && at_upper) continue;
    if (at_lower) worst = std::max(worst, -g[i]);
    else if (at_upper) worst = std::max(worst, g[i]);
    else worst = std::max(worst, std::abs(g[i]));
  }
  return worst;
}

}  // namespace layered_ocp
