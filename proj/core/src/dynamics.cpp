#include "layered_ocp/dynamics.hpp"

#include <cmath>
#include <random>
#include <utility>

#include "layered_ocp/errors.hpp"

namespace layered_ocp {

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::linear:
      return "linear";
    case ModelKind::cartpole:
      return "cartpole";
    case ModelKind::unicycle:
      return "unicycle";
    case ModelKind::quadrotor:
      return "quadrotor";
    case ModelKind::custom:
      break;
  }
  return "custom";
}

DynamicsModel::DynamicsModel(ModelKind kind, Eigen::Index state_dim, Eigen::Index input_dim,
                             double dt, StepFunction step, JacobianFunction jacobian)
    : kind_(kind),
      n_(state_dim),
      m_(input_dim),
      dt_(dt),
      step_(std::move(step)),
      jacobian_(std::move(jacobian)) {
  if (n_ <= 0 || m_ <= 0) throw InvalidArgument("model dimensions must be positive");
  if (!(dt_ > 0.0)) throw InvalidArgument("model dt must be positive");
  if (!step_) throw InvalidArgument("model needs a step function");
}

void DynamicsModel::check_dims(const Vector &x, const Vector &u) const {
  if (x.size() != n_) {
    throw InvalidArgument("state has dimension " + std::to_string(x.size()) + ", model expects " +
                          std::to_string(n_));
  }
  if (u.size() != m_) {
    throw InvalidArgument("input has dimension " + std::to_string(u.size()) + ", model expects " +
                          std::to_string(m_));
  }
}

Vector DynamicsModel::step(const Vector &x, const Vector &u, std::size_t t) const {
  check_dims(x, u);
  return step_(x, u, t);
}

Linearization DynamicsModel::linearize(const Vector &x, const Vector &u, std::size_t t) const {
  check_dims(x, u);
  Linearization lin = jacobian_ ? jacobian_(x, u, t) : finite_difference_jacobian(step_, x, u, t);
  if (!lin.A.allFinite() || !lin.B.allFinite()) {
    throw NumericalError("non-finite Jacobian entries for " + label() + " model");
  }
  return lin;
}

const Matrix &DynamicsModel::A(std::size_t t) const {
  if (!linear_) throw InvalidArgument("A(t) requested from a nonlinear model");
  return linear_->A.size() == 1 ? linear_->A.front() : linear_->A.at(t);
}

const Matrix &DynamicsModel::B(std::size_t t) const {
  if (!linear_) throw InvalidArgument("B(t) requested from a nonlinear model");
  return linear_->B.size() == 1 ? linear_->B.front() : linear_->B.at(t);
}

std::size_t DynamicsModel::linear_stages() const { return linear_ ? linear_->A.size() : 0; }

Linearization finite_difference_jacobian(const StepFunction &f, const Vector &x, const Vector &u,
                                         std::size_t t, double step) {
  const Vector fx = f(x, u, t);
  Linearization lin{Matrix(fx.size(), x.size()), Matrix(fx.size(), u.size())};
  Vector xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = step * std::max(1.0, std::abs(x[i]));
    xp[i] = x[i] + h;
    const Vector plus = f(xp, u, t);
    xp[i] = x[i] - h;
    const Vector minus = f(xp, u, t);
    xp[i] = x[i];
    lin.A.col(i) = (plus - minus) / (2.0 * h);
  }
  Vector up = u;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const double h = step * std::max(1.0, std::abs(u[i]));
    up[i] = u[i] + h;
    const Vector plus = f(x, up, t);
    up[i] = u[i] - h;
    const Vector minus = f(x, up, t);
    up[i] = u[i];
    lin.B.col(i) = (plus - minus) / (2.0 * h);
  }
  return lin;
}

DynamicsModel make_linear(MatrixSeq A_seq, MatrixSeq B_seq) {
  if (A_seq.empty() || A_seq.size() != B_seq.size()) {
    throw InvalidArgument("linear model needs matching, non-empty A and B sequences");
  }
  const Eigen::Index n = A_seq.front().rows();
  const Eigen::Index m = B_seq.front().cols();
  for (std::size_t t = 0; t < A_seq.size(); ++t) {
    if (A_seq[t].rows() != n || A_seq[t].cols() != n || B_seq[t].rows() != n ||
        B_seq[t].cols() != m) {
      throw InvalidArgument("linear model matrices have inconsistent shapes at stage " +
                            std::to_string(t));
    }
  }
  auto data = std::make_shared<DynamicsModel::LinearData>();
  data->A = std::move(A_seq);
  data->B = std::move(B_seq);
  auto pick = [](const MatrixSeq &seq, std::size_t t) -> const Matrix & {
    return seq.size() == 1 ? seq.front() : seq.at(t);
  };
  StepFunction step = [data, pick](const Vector &x, const Vector &u, std::size_t t) -> Vector {
    return pick(data->A, t) * x + pick(data->B, t) * u;
  };
  JacobianFunction jac = [data, pick](const Vector &, const Vector &, std::size_t t) {
    return Linearization{pick(data->A, t), pick(data->B, t)};
  };
  DynamicsModel model(ModelKind::linear, n, m, 1.0, std::move(step), std::move(jac));
  model.linear_ = std::move(data);
  return model;
}

DynamicsModel make_linear(const Matrix &A, const Matrix &B) {
  return make_linear(MatrixSeq{A}, MatrixSeq{B});
}

DynamicsModel euler_discretize(ContinuousRhs rhs, Eigen::Index state_dim, Eigen::Index input_dim,
                               double dt, ModelKind kind, JacobianFunction jacobian) {
  if (!(dt > 0.0)) throw InvalidArgument("Euler discretization needs dt > 0");
  if (!rhs) throw InvalidArgument("Euler discretization needs a vector field");
  StepFunction step = [rhs = std::move(rhs), dt](const Vector &x, const Vector &u,
                                                 std::size_t) -> Vector {
    return x + dt * rhs(x, u);
  };
  return DynamicsModel(kind, state_dim, input_dim, dt, std::move(step), std::move(jacobian));
}

// H(q) qdd + C(q, qd) qd + G(q) = (F, 0)
Vector cartpole_rhs(const CartpoleParams &p, const Vector &x, const Vector &u) {
  const double theta = x[1];
  const double theta_dot = x[3];
  const double s = std::sin(theta);
  const double c = std::cos(theta);
  const double ml = p.pole_mass * p.pole_length;

  Eigen::Matrix2d H;
  H << p.cart_mass + p.pole_mass, ml * c, ml * c, p.pole_mass * p.pole_length * p.pole_length;
  Eigen::Matrix2d C;
  C << 0.0, -ml * theta_dot * s, 0.0, 0.0;
  const Eigen::Vector2d G(0.0, p.pole_mass * p.gravity * p.pole_length * s);
  const Eigen::Vector2d qd(x[2], x[3]);
  const Eigen::Vector2d F(u[0], 0.0);

  const Eigen::Vector2d qdd = H.ldlt().solve(F - C * qd - G);
  Vector dx(4);
  dx << x[2], x[3], qdd[0], qdd[1];
  return dx;
}

double cartpole_energy(const CartpoleParams &p, const Vector &x) {
  const double c = std::cos(x[1]);
  const double ml = p.pole_mass * p.pole_length;
  Eigen::Matrix2d H;
  H << p.cart_mass + p.pole_mass, ml * c, ml * c, p.pole_mass * p.pole_length * p.pole_length;
  const Eigen::Vector2d qd(x[2], x[3]);
  return 0.5 * qd.dot(H * qd) - ml * p.gravity * c;
}

DynamicsModel make_cartpole(const CartpoleParams &p, double dt) {
  return euler_discretize([p](const Vector &x, const Vector &u) { return cartpole_rhs(p, x, u); },
                          4, 1, dt, ModelKind::cartpole);
}

Vector unicycle_rhs(const Vector &x, const Vector &u) {
  Vector dx(3);
  dx << u[0] * std::cos(x[2]), u[0] * std::sin(x[2]), u[1];
  return dx;
}

DynamicsModel make_unicycle(double dt) {
  JacobianFunction jac = [dt](const Vector &x, const Vector &u, std::size_t) {
    const double c = std::cos(x[2]);
    const double s = std::sin(x[2]);
    Linearization lin{Matrix::Identity(3, 3), Matrix::Zero(3, 2)};
    lin.A(0, 2) = -dt * u[0] * s;
    lin.A(1, 2) = dt * u[0] * c;
    lin.B(0, 0) = dt * c;
    lin.B(1, 0) = dt * s;
    lin.B(2, 1) = dt;
    return lin;
  };
  return euler_discretize(unicycle_rhs, 3, 2, dt, ModelKind::unicycle, std::move(jac));
}

Vector quadrotor_rhs(const QuadrotorParams &p, const Vector &x, const Vector &u) {
  const Eigen::Vector3d vel = x.segment<3>(3);
  const double roll = x[6];
  const double pitch = x[7];
  const double yaw = x[8];
  const Eigen::Vector3d omega = x.segment<3>(9);

  // ZYX body-to-world rotation
  const Eigen::Matrix3d R = (Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()) *
                             Eigen::AngleAxisd(pitch, Eigen::Vector3d::UnitY()) *
                             Eigen::AngleAxisd(roll, Eigen::Vector3d::UnitX()))
                                .toRotationMatrix();
  const Eigen::Vector3d accel =
      R.col(2) * (u[0] / p.mass) - Eigen::Vector3d(0.0, 0.0, p.gravity);

  const Eigen::Vector3d I_omega = p.inertia.cwiseProduct(omega);
  const Eigen::Vector3d torque = u.segment<3>(1);
  const Eigen::Vector3d omega_dot = (torque - omega.cross(I_omega)).cwiseQuotient(p.inertia);

  Vector dx(12);
  dx << vel, accel, omega, omega_dot;
  return dx;
}

DynamicsModel make_quadrotor(const QuadrotorParams &p, double dt) {
  if (!(p.mass > 0.0) || !(p.inertia.minCoeff() > 0.0)) {
    throw InvalidArgument("quadrotor mass and inertia must be positive");
  }
  return euler_discretize(
      [p](const Vector &x, const Vector &u) { return quadrotor_rhs(p, x, u); }, 12, 4, dt,
      ModelKind::quadrotor);
}

void check_divergence(const Vector &x, std::size_t t) {
  if (!x.allFinite()) throw DivergenceError("non-finite state", t);
  if (x.size() > 0 && x.cwiseAbs().maxCoeff() > kDivergenceBound) {
    throw DivergenceError("state magnitude exceeded divergence bound", t);
  }
}

Trajectory rollout(const DynamicsModel &model, const Vector &x0, const VectorSeq &inputs,
                   const std::optional<NoiseModel> &noise, std::uint64_t seed) {
  if (x0.size() != model.state_dim()) throw InvalidArgument("initial state dimension mismatch");
  Trajectory traj;
  traj.states.reserve(inputs.size() + 1);
  traj.states.push_back(x0);
  traj.inputs = inputs;
  check_divergence(x0, 0);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  for (std::size_t t = 0; t < inputs.size(); ++t) {
    Vector next = model.step(traj.states[t], inputs[t], t);
    if (noise) {
      const Matrix &H = noise->at(t);
      Vector w(H.cols());
      for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = gauss(rng);
      next += H * w;
    }
    check_divergence(next, t + 1);
    traj.states.push_back(std::move(next));
  }
  return traj;
}

bool is_dynamically_feasible(const DynamicsModel &model, const Trajectory &traj) {
  if (traj.states.size() != traj.inputs.size() + 1) return false;
  for (std::size_t t = 0; t < traj.inputs.size(); ++t) {
    const Vector next = model.step(traj.states[t], traj.inputs[t], t);
    if (next.size() != traj.states[t + 1].size()) return false;
    for (Eigen::Index i = 0; i < next.size(); ++i) {
      if (next[i] != traj.states[t + 1][i]) return false;
    }
  }
  return true;
}

}  // namespace layered_ocp
