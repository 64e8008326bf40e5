#pragma once

#include <optional>

#include "layered_ocp/layered_admm.hpp"
#include "layered_ocp/tracking_lqr.hpp"
#include "layered_ocp/traj_opt.hpp"
#include "layered_ocp/types.hpp"

namespace layered_ocp::verify {

/// Linear-quadratic problem over the stacked (x_0..x_N, u_0..u_{N-1}):
///   sum_t x'Qx_t x + qx_t'x  +  sum_t u'Ru_t u + ru_t'u  +  constant
///   s.t. x_0 = x0, x_{t+1} = A_t x_t + B_t u_t.
struct DenseLq {
  MatrixSeq A;  // N
  MatrixSeq B;  // N
  Vector x0;
  MatrixSeq Qx;  // N+1
  VectorSeq qx;  // N+1
  MatrixSeq Ru;  // N
  VectorSeq ru;  // N
  double constant = 0.0;

  std::size_t horizon() const { return A.size(); }
  double objective(const Trajectory &traj) const;
};

struct DenseSolution {
  Trajectory trajectory;
  double objective = 0.0;
};

/// Tracking subproblem written out densely (no augmentation, no recursion).
DenseLq dense_from_tracking(const TrackingProblem &prob);

/// Unconstrained problem min C_x(Cx) + sum u'Ru for a linear model.
DenseLq dense_from_layered(const LayeredProblem &prob);

/// Solves the equality-constrained QP through its full KKT system.
DenseSolution solve_kkt(const DenseLq &lq);

/// Input-box constrained version: eliminates the states and runs accelerated
/// projected gradient with adaptive restart on the inputs.
DenseSolution solve_input_box(const DenseLq &lq, const InputBox &box, int iterations = 200000,
                              double tol = 1e-13);

/// Brute-force minimizer of prox_objective over a 2-D grid with spacing h,
/// skipping points strictly inside the rectangle.
struct GridResult {
  Vector point;
  double value = 0.0;
};
GridResult grid_search_obstacle(const ReferenceCost &cost, std::size_t t, const Vector &anchor,
                                double rho, const ObstacleRect &rect, double h = 1e-3);

double relative_gap(double a, double b);

}  // namespace layered_ocp::verify
