#include "layered_ocp/verify/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "layered_ocp/errors.hpp"

namespace layered_ocp::verify {

double DenseLq::objective(const Trajectory &traj) const {
  double J = constant;
  for (std::size_t t = 0; t < traj.states.size(); ++t) {
    const Vector &x = traj.states[t];
    J += x.dot(Qx[t] * x) + qx[t].dot(x);
  }
  for (std::size_t t = 0; t < traj.inputs.size(); ++t) {
    const Vector &u = traj.inputs[t];
    J += u.dot(Ru[t] * u) + ru[t].dot(u);
  }
  return J;
}

DenseLq dense_from_tracking(const TrackingProblem &prob) {
  prob.validate();
  const std::size_t N = prob.horizon();
  const Matrix C = prob.selector();
  const double rho = prob.rho;
  DenseLq lq;
  lq.x0 = prob.initial_state;
  for (std::size_t t = 0; t < N; ++t) {
    lq.A.push_back(prob.A_at(t));
    lq.B.push_back(prob.B_at(t));
  }
  // (rho/2)||Cx - r + v||^2 = (rho/2) x'C'Cx + rho (v - r)'Cx + (rho/2)||v - r||^2
  for (std::size_t t = 0; t <= N; ++t) {
    const Vector d = prob.dual[t] - prob.reference[t];
    lq.Qx.push_back(0.5 * rho * C.transpose() * C);
    lq.qx.push_back(rho * C.transpose() * d);
    lq.constant += 0.5 * rho * d.squaredNorm();
  }
  for (std::size_t t = 0; t < N; ++t) {
    Matrix R = prob.R_at(t);
    Vector r = Vector::Zero(R.rows());
    if (prob.input_proximal) {
      const Vector b = prob.input_proximal->action[t] - prob.input_proximal->dual[t];
      R += 0.5 * rho * Matrix::Identity(R.rows(), R.cols());
      r -= rho * b;
      lq.constant += 0.5 * rho * b.squaredNorm();
    }
    lq.Ru.push_back(R);
    lq.ru.push_back(r);
  }
  return lq;
}

DenseLq dense_from_layered(const LayeredProblem &prob) {
  prob.validate();
  if (!prob.model.is_linear()) throw InvalidArgument("dense oracle needs a linear model");
  const std::size_t N = prob.horizon;
  const Matrix C = prob.selector();
  DenseLq lq;
  lq.x0 = prob.initial_state;
  for (std::size_t t = 0; t < N; ++t) {
    lq.A.push_back(prob.model.A(t));
    lq.B.push_back(prob.model.B(t));
  }
  for (std::size_t t = 0; t <= N; ++t) {
    const Matrix &Q = prob.cost.weights[t];
    const Vector &s = prob.cost.targets[t];
    lq.Qx.push_back(C.transpose() * Q * C);
    Vector lin = -C.transpose() * (Q + Q.transpose()) * s;
    if (!prob.cost.linear.empty()) lin += C.transpose() * prob.cost.linear[t];
    lq.qx.push_back(lin);
    lq.constant += s.dot(Q * s);
  }
  for (std::size_t t = 0; t < N; ++t) {
    lq.Ru.push_back(prob.R_at(t));
    lq.ru.push_back(Vector::Zero(prob.model.input_dim()));
  }
  return lq;
}

DenseSolution solve_kkt(const DenseLq &lq) {
  const std::size_t N = lq.horizon();
  const Eigen::Index n = lq.x0.size();
  const Eigen::Index m = lq.B.front().cols();
  const Eigen::Index nx = static_cast<Eigen::Index>(N + 1) * n;
  const Eigen::Index nv = nx + static_cast<Eigen::Index>(N) * m;
  const Eigen::Index nc = nx;

  // Stationarity of sum w'Hw/2 + h'w with H = 2 blockdiag(Q, R).
  Matrix K = Matrix::Zero(nv + nc, nv + nc);
  Vector rhs = Vector::Zero(nv + nc);
  for (std::size_t t = 0; t <= N; ++t) {
    const Eigen::Index i = static_cast<Eigen::Index>(t) * n;
    K.block(i, i, n, n) = lq.Qx[t] + lq.Qx[t].transpose();
    rhs.segment(i, n) = -lq.qx[t];
  }
  for (std::size_t t = 0; t < N; ++t) {
    const Eigen::Index i = nx + static_cast<Eigen::Index>(t) * m;
    K.block(i, i, m, m) = lq.Ru[t] + lq.Ru[t].transpose();
    rhs.segment(i, m) = -lq.ru[t];
  }
  // Constraint rows: x_0 = x0, x_{t+1} - A x_t - B u_t = 0.
  Matrix E = Matrix::Zero(nc, nv);
  Vector e = Vector::Zero(nc);
  E.block(0, 0, n, n).setIdentity();
  e.head(n) = lq.x0;
  for (std::size_t t = 0; t < N; ++t) {
    const Eigen::Index row = static_cast<Eigen::Index>(t + 1) * n;
    E.block(row, row, n, n).setIdentity();
    E.block(row, static_cast<Eigen::Index>(t) * n, n, n) = -lq.A[t];
    E.block(row, nx + static_cast<Eigen::Index>(t) * m, n, m) = -lq.B[t];
  }
  K.block(nv, 0, nc, nv) = E;
  K.block(0, nv, nv, nc) = E.transpose();
  rhs.tail(nc) = e;

  const Vector w = K.fullPivLu().solve(rhs);
  if (!w.allFinite()) throw NumericalError("KKT system is singular");

  DenseSolution sol;
  for (std::size_t t = 0; t <= N; ++t) {
    sol.trajectory.states.push_back(w.segment(static_cast<Eigen::Index>(t) * n, n));
  }
  for (std::size_t t = 0; t < N; ++t) {
    sol.trajectory.inputs.push_back(w.segment(nx + static_cast<Eigen::Index>(t) * m, m));
  }
  sol.objective = lq.objective(sol.trajectory);
  return sol;
}

DenseSolution solve_input_box(const DenseLq &lq, const InputBox &box, int iterations, double tol) {
  const std::size_t N = lq.horizon();
  const Eigen::Index n = lq.x0.size();
  const Eigen::Index m = lq.B.front().cols();
  const Eigen::Index nu = static_cast<Eigen::Index>(N) * m;

  // x = Phi x0 + Gamma u.
  std::vector<Matrix> Gamma(N + 1, Matrix::Zero(n, nu));
  std::vector<Vector> drift(N + 1);
  drift[0] = lq.x0;
  for (std::size_t t = 0; t < N; ++t) {
    Gamma[t + 1] = lq.A[t] * Gamma[t];
    Gamma[t + 1].block(0, static_cast<Eigen::Index>(t) * m, n, m) += lq.B[t];
    drift[t + 1] = lq.A[t] * drift[t];
  }
  Matrix H = Matrix::Zero(nu, nu);
  Vector g = Vector::Zero(nu);
  for (std::size_t t = 0; t <= N; ++t) {
    const Matrix Qs = lq.Qx[t] + lq.Qx[t].transpose();
    H += Gamma[t].transpose() * Qs * Gamma[t];
    g += Gamma[t].transpose() * (Qs * drift[t] + lq.qx[t]);
  }
  for (std::size_t t = 0; t < N; ++t) {
    const Eigen::Index i = static_cast<Eigen::Index>(t) * m;
    H.block(i, i, m, m) += lq.Ru[t] + lq.Ru[t].transpose();
    g.segment(i, m) += lq.ru[t];
  }
  H = 0.5 * (H + H.transpose());

  Vector lo(nu), hi(nu);
  for (std::size_t t = 0; t < N; ++t) {
    lo.segment(static_cast<Eigen::Index>(t) * m, m) = box.lower;
    hi.segment(static_cast<Eigen::Index>(t) * m, m) = box.upper;
  }
  const double L = Eigen::SelfAdjointEigenSolver<Matrix>(H, Eigen::EigenvaluesOnly)
                       .eigenvalues()
                       .maxCoeff();
  auto project = [&](const Vector &u) { return u.cwiseMax(lo).cwiseMin(hi); };
  auto f = [&](const Vector &u) { return 0.5 * u.dot(H * u) + g.dot(u); };

  Vector u = project(Vector::Zero(nu));
  Vector y = u;
  double theta = 1.0;
  double fu = f(u);
  for (int it = 0; it < iterations; ++it) {
    const Vector u_next = project(y - (H * y + g) / L);
    const double f_next = f(u_next);
    if (f_next > fu) {
      // adaptive restart
      y = u;
      theta = 1.0;
      continue;
    }
    const double step = (u_next - u).norm();
    const double theta_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * theta * theta));
    y = u_next + ((theta - 1.0) / theta_next) * (u_next - u);
    u = u_next;
    fu = f_next;
    theta = theta_next;
    if (step <= tol * std::max(1.0, u.norm())) break;
  }

  DenseSolution sol;
  sol.trajectory.states.push_back(lq.x0);
  for (std::size_t t = 0; t < N; ++t) {
    const Vector ut = u.segment(static_cast<Eigen::Index>(t) * m, m);
    sol.trajectory.inputs.push_back(ut);
    sol.trajectory.states.push_back(lq.A[t] * sol.trajectory.states[t] + lq.B[t] * ut);
  }
  sol.objective = lq.objective(sol.trajectory);
  return sol;
}

GridResult grid_search_obstacle(const ReferenceCost &cost, std::size_t t, const Vector &anchor,
                                double rho, const ObstacleRect &rect, double h) {
  if (anchor.size() != 2) throw InvalidArgument("grid search is two-dimensional");
  // Unconstrained minimizer bounds the search window.
  const Matrix &Q = cost.weights[t];
  const Matrix H = (Q + Q.transpose()) + rho * Matrix::Identity(2, 2);
  Vector rhs = (Q + Q.transpose()) * cost.targets[t] + rho * anchor;
  if (!cost.linear.empty()) rhs -= cost.linear[t];
  const Vector center = H.ldlt().solve(rhs);
  const double lo_x = std::min(center[0], rect.x_min) - 0.25;
  const double hi_x = std::max(center[0], rect.x_max) + 0.25;
  const double lo_y = std::min(center[1], rect.y_min) - 0.25;
  const double hi_y = std::max(center[1], rect.y_max) + 0.25;

  const double q00 = Q(0, 0), q01 = Q(0, 1), q10 = Q(1, 0), q11 = Q(1, 1);
  const double s0 = cost.targets[t][0], s1 = cost.targets[t][1];
  const double c0 = cost.linear.empty() ? 0.0 : cost.linear[t][0];
  const double c1 = cost.linear.empty() ? 0.0 : cost.linear[t][1];

  GridResult best{Vector::Zero(2), std::numeric_limits<double>::infinity()};
  Vector r(2);
  const long nx = static_cast<long>(std::ceil((hi_x - lo_x) / h));
  const long ny = static_cast<long>(std::ceil((hi_y - lo_y) / h));
  for (long i = 0; i <= nx; ++i) {
    r[0] = lo_x + static_cast<double>(i) * h;
    for (long j = 0; j <= ny; ++j) {
      r[1] = lo_y + static_cast<double>(j) * h;
      if (r[0] > rect.x_min && r[0] < rect.x_max && r[1] > rect.y_min && r[1] < rect.y_max) {
        continue;
      }
      const double d0 = r[0] - s0, d1 = r[1] - s1;
      const double a0 = anchor[0] - r[0], a1 = anchor[1] - r[1];
      const double val = q00 * d0 * d0 + (q01 + q10) * d0 * d1 + q11 * d1 * d1 + c0 * r[0] +
                         c1 * r[1] + 0.5 * rho * (a0 * a0 + a1 * a1);
      if (val < best.value) {
        best.value = val;
        best.point = r;
      }
    }
  }
  best.value = prox_objective(cost, t, anchor, rho, best.point);
  return best;
}

double relative_gap(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

}  // namespace layered_ocp::verify
