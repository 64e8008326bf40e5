#pragma once

#include <optional>
#include <variant>
#include <vector>

#include "layered_ocp/types.hpp"

namespace layered_ocp {

/// Separable reference cost sum_t (r_t - s_t)'Q_t(r_t - s_t) + c_t'r_t.
struct ReferenceCost {
  MatrixSeq weights;  // N+1, PSD
  VectorSeq targets;  // N+1
  VectorSeq linear;   // empty, or N+1

  std::size_t horizon() const { return targets.size() - 1; }
  Eigen::Index dim() const { return targets.front().size(); }

  double stage(std::size_t t, const Vector &r) const;
  double evaluate(const VectorSeq &r) const;
  void validate() const;

  /// Q on stages t < N, Q_N at t = N, both aimed at the same goal.
  static ReferenceCost goal(const Matrix &Q, const Matrix &Q_terminal, const Vector &goal,
                            std::size_t horizon);
  /// Weight Q at every stage against the per-stage targets.
  static ReferenceCost tracking(const Matrix &Q, VectorSeq targets);
};

struct Unconstrained {};

/// lower <= r <= upper coordinatewise; infinite entries leave a coordinate free.
struct Box {
  Vector lower;
  Vector upper;
};

/// Excludes the open rectangle (x_min, x_max) x (y_min, y_max) on the two
/// coordinates x_index, y_index.
struct ObstacleRect {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;
  Eigen::Index x_index = 0;
  Eigen::Index y_index = 1;
};

using StageConstraint = std::variant<Unconstrained, Box, ObstacleRect>;

/// Per-timestep state constraints on the reference (N+1 entries; empty means
/// unconstrained everywhere).
struct ConstraintSpec {
  std::vector<StageConstraint> stages;

  const StageConstraint &at(std::size_t t) const;
  bool empty() const { return stages.empty(); }

  static ConstraintSpec unconstrained(std::size_t horizon);
  /// First ceil(N/2) stages take `first`, the rest take `second`.
  static ConstraintSpec switching(std::size_t horizon, const StageConstraint &first,
                                  const StageConstraint &second);
  static ConstraintSpec uniform(std::size_t horizon, const StageConstraint &c);
};

/// Bounds |a| <= b style on the redundant action variable, coordinatewise.
struct InputBox {
  Vector lower;
  Vector upper;

  static InputBox symmetric(const Vector &bound);
};

/// Exact test, no tolerance: box bounds inclusive, rectangle interior open.
bool satisfies(const StageConstraint &c, const Vector &r);
bool satisfies(const ConstraintSpec &spec, const VectorSeq &r);

/// Per-stage objective (r - s)'Q(r - s) + c'r + (rho/2)||anchor - r||^2.
double prox_objective(const ReferenceCost &cost, std::size_t t, const Vector &anchor, double rho,
                      const Vector &r);

/// Exact minimizer of the trajectory-layer subproblem, stage by stage.
/// Throws InfeasibleError naming the stage when a box is empty.
VectorSeq prox_reference(const ReferenceCost &cost, const VectorSeq &anchor, double rho,
                         const ConstraintSpec &cons);

/// One stage of prox_reference.
Vector prox_stage(const ReferenceCost &cost, std::size_t t, const Vector &anchor, double rho,
                  const StageConstraint &c);

/// Global minimizer over the complement of the open rectangle by enumerating
/// the four closed half-spaces (left, right, bottom, top). Ties keep the
/// earlier candidate.
Vector prox_obstacle(const Vector &anchor, const Matrix &Q, const Vector &target, double rho,
                     const ObstacleRect &rect);

/// a_t = clip(u_t + v_{a,t}, lower, upper).
VectorSeq prox_input(const VectorSeq &u_plus_dual, const InputBox &box);
VectorSeq prox_input(const VectorSeq &u_plus_dual, double bound);

/// min 0.5 x'Hx - b'x  s.t. lower <= x <= upper, H symmetric positive definite.
/// Primal active-set method; exact up to the linear solves.
Vector solve_box_qp(const Matrix &H, const Vector &b, const Vector &lower, const Vector &upper);

/// Largest violation of the box-QP optimality conditions at x.
double box_qp_kkt_residual(const Matrix &H, const Vector &b, const Vector &lower,
                           const Vector &upper, const Vector &x);

}  // namespace layered_ocp
