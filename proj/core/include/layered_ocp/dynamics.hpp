#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "layered_ocp/types.hpp"

namespace layered_ocp {

enum class ModelKind { linear, cartpole, unicycle, quadrotor, custom };

std::string to_string(ModelKind kind);

/// Jacobians of the discrete step at a point.
struct Linearization {
  Matrix A;  // d f / d x
  Matrix B;  // d f / d u
};

using StepFunction = std::function<Vector(const Vector &x, const Vector &u, std::size_t t)>;
using JacobianFunction =
    std::function<Linearization(const Vector &x, const Vector &u, std::size_t t)>;
using ContinuousRhs = std::function<Vector(const Vector &x, const Vector &u)>;

/// Entries beyond this magnitude are treated as divergence.
inline constexpr double kDivergenceBound = 1e6;
inline constexpr double kFiniteDifferenceStep = 1e-6;

/// Immutable discrete-time system x_{t+1} = f(x_t, u_t). Copies share the
/// underlying callables; all members are safe to call concurrently.
class DynamicsModel {
 public:
  DynamicsModel(ModelKind kind, Eigen::Index state_dim, Eigen::Index input_dim, double dt,
                StepFunction step, JacobianFunction jacobian = nullptr);

  ModelKind kind() const { return kind_; }
  std::string label() const { return to_string(kind_); }
  Eigen::Index state_dim() const { return n_; }
  Eigen::Index input_dim() const { return m_; }
  double dt() const { return dt_; }

  /// f(x, u) at stage t (t only matters for time-varying linear models).
  Vector step(const Vector &x, const Vector &u, std::size_t t = 0) const;

  /// Analytic Jacobians when the model provides them, else central differences.
  Linearization linearize(const Vector &x, const Vector &u, std::size_t t = 0) const;

  bool has_analytic_jacobian() const { return static_cast<bool>(jacobian_); }

  /// Linear models only: the exact (A_t, B_t).
  bool is_linear() const { return linear_ != nullptr; }
  const Matrix &A(std::size_t t) const;
  const Matrix &B(std::size_t t) const;
  /// Number of distinct stages stored (1 for time-invariant models).
  std::size_t linear_stages() const;

 private:
  friend DynamicsModel make_linear(MatrixSeq, MatrixSeq);

  struct LinearData {
    MatrixSeq A;
    MatrixSeq B;
  };

  void check_dims(const Vector &x, const Vector &u) const;

  ModelKind kind_;
  Eigen::Index n_;
  Eigen::Index m_;
  double dt_;
  StepFunction step_;
  JacobianFunction jacobian_;
  std::shared_ptr<const LinearData> linear_;
};

/// Central-difference Jacobians of an arbitrary step function.
Linearization finite_difference_jacobian(const StepFunction &f, const Vector &x, const Vector &u,
                                         std::size_t t, double step = kFiniteDifferenceStep);

/// x_{t+1} = A_t x_t + B_t u_t. A single (A, B) pair means time-invariant.
DynamicsModel make_linear(MatrixSeq A_seq, MatrixSeq B_seq);
DynamicsModel make_linear(const Matrix &A, const Matrix &B);

/// f(x, u) = x + dt * rhs(x, u).
DynamicsModel euler_discretize(ContinuousRhs rhs, Eigen::Index state_dim, Eigen::Index input_dim,
                               double dt, ModelKind kind = ModelKind::custom,
                               JacobianFunction jacobian = nullptr);

struct CartpoleParams {
  double cart_mass = 1.0;
  double pole_mass = 0.1;
  double pole_length = 1.0;
  double gravity = 9.81;
};

/// State (cart position, pole angle, cart velocity, pole rate); input is the
/// horizontal force. Angle 0 hangs down, pi is upright.
Vector cartpole_rhs(const CartpoleParams &p, const Vector &x, const Vector &u);
/// Kinetic plus potential energy.
double cartpole_energy(const CartpoleParams &p, const Vector &x);
DynamicsModel make_cartpole(const CartpoleParams &p = {}, double dt = 0.1);

/// State (x1, x2, heading); input (linear speed, turn rate).
Vector unicycle_rhs(const Vector &x, const Vector &u);
DynamicsModel make_unicycle(double dt = 0.1);

struct QuadrotorParams {
  double mass = 1.0;
  Eigen::Vector3d inertia{0.01, 0.01, 0.02};
  double gravity = 9.81;
};

/// State (position, velocity, roll-pitch-yaw, angular rate); input (collective
/// thrust, three body torques). Euler-angle rates equal the angular rates.
Vector quadrotor_rhs(const QuadrotorParams &p, const Vector &x, const Vector &u);
DynamicsModel make_quadrotor(const QuadrotorParams &p = {}, double dt = 0.1);

/// Additive process noise H_t w_t with w_t ~ N(0, I).
struct NoiseModel {
  MatrixSeq H;  // one matrix means time-invariant

  const Matrix &at(std::size_t t) const { return H.size() == 1 ? H.front() : H.at(t); }
  Eigen::Index noise_dim() const { return H.front().cols(); }
};

/// Simulates inputs from x0. With noise, draws are seeded and reproducible.
/// Throws DivergenceError carrying the first offending timestep.
Trajectory rollout(const DynamicsModel &model, const Vector &x0, const VectorSeq &inputs,
                   const std::optional<NoiseModel> &noise = std::nullopt, std::uint64_t seed = 0);

/// True when each stored transition equals model.step bit for bit.
bool is_dynamically_feasible(const DynamicsModel &model, const Trajectory &traj);

/// Throws DivergenceError when x is non-finite or exceeds kDivergenceBound.
void check_divergence(const Vector &x, std::size_t t);

}  // namespace layered_ocp
