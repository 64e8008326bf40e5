#include "layered_ocp/layered_admm.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "layered_ocp/errors.hpp"

namespace layered_ocp {

Matrix LayeredProblem::selector() const {
  if (output_selector) return *output_selector;
  return Matrix::Identity(model.state_dim(), model.state_dim());
}

Eigen::Index LayeredProblem::reference_dim() const {
  return output_selector ? output_selector->rows() : model.state_dim();
}

void LayeredProblem::validate() const {
  if (horizon < 1) throw InvalidArgument("horizon must be at least 1");
  if (initial_state.size() != model.state_dim()) {
    throw InvalidArgument("initial state dimension does not match the model");
  }
  if (output_selector &&
      (output_selector->cols() != model.state_dim() || output_selector->rows() > model.state_dim())) {
    throw InvalidArgument("output selector must be q x n with q <= n");
  }
  cost.validate();
  if (cost.horizon() != horizon) throw InvalidArgument("reference cost horizon mismatch");
  if (cost.dim() != reference_dim()) throw InvalidArgument("reference cost dimension mismatch");
  if (R.empty() || (R.size() != 1 && R.size() != horizon)) {
    throw InvalidArgument("input weights must hold 1 or N entries");
  }
  for (const auto &Rt : R) {
    if (Rt.rows() != model.input_dim() || Rt.cols() != model.input_dim()) {
      throw InvalidArgument("input weight must be m x m");
    }
  }
  if (!constraints.empty() && constraints.stages.size() != horizon + 1) {
    throw InvalidArgument("constraint spec must have N+1 entries");
  }
  if (input_bounds && (input_bounds->lower.size() != model.input_dim() ||
                       input_bounds->upper.size() != model.input_dim())) {
    throw InvalidArgument("input bound dimension mismatch");
  }
}

double LayeredProblem::objective(const Trajectory &traj) const {
  const Matrix C = selector();
  VectorSeq y(traj.states.size());
  for (std::size_t t = 0; t < y.size(); ++t) y[t] = C * traj.states[t];
  double total = cost.evaluate(y);
  for (std::size_t t = 0; t < traj.inputs.size(); ++t) {
    total += traj.inputs[t].dot(R_at(t) * traj.inputs[t]);
  }
  return total;
}

void AdmmConfig::validate() const {
  if (!(rho0 > 0.0)) throw InvalidArgument("rho0 must be positive");
  if (!(mu > 1.0) || !(tau_incr > 1.0) || !(tau_decr > 1.0)) {
    throw InvalidArgument("mu, tau_incr and tau_decr must exceed 1");
  }
  if (!(eps_primal > 0.0) || !(eps_dual > 0.0)) throw InvalidArgument("tolerances must be positive");
  if (!(rho_min > 0.0) || !(rho_max >= rho_min)) throw InvalidArgument("invalid rho bounds");
  if (max_outer < 1 || max_inner < 1) throw InvalidArgument("iteration caps must be positive");
}

RhoUpdate update_rho(double rho, double primal_res, double dual_res, double mu, double tau_incr,
                     double tau_decr) {
  RhoUpdate out{rho, 1.0};
  if (primal_res > mu * dual_res) {
    out.rho = tau_incr * rho;
  } else if (dual_res > mu * primal_res) {
    out.rho = rho / tau_decr;
  }
  out.rescale = rho / out.rho;
  return out;
}

Residuals residuals(const AdmmState &state, const VectorSeq &r_prev, const Matrix &selector) {
  double primal_sq = 0.0;
  for (std::size_t t = 0; t < state.r.size(); ++t) {
    primal_sq += (selector * state.x.states[t] - state.r[t]).squaredNorm();
  }
  return {std::sqrt(primal_sq), state.rho * stacked_distance(state.r, r_prev)};
}

int iteration_count(const std::vector<int> &inner_iterations) {
  int total = 0;
  for (int i : inner_iterations) total += 1 + i;
  return total;
}

VectorSeq interpolate(const Vector &from, const Vector &to, std::size_t horizon) {
  VectorSeq out(horizon + 1);
  for (std::size_t t = 0; t <= horizon; ++t) {
    const double s = static_cast<double>(t) / static_cast<double>(horizon);
    out[t] = (1.0 - s) * from + s * to;
  }
  return out;
}

Vector LayeredPolicy::action(std::size_t t, const Vector &x) const {
  if (K_lqr.empty()) return plan.inputs.at(t);
  return plan.inputs.at(t) - K_lqr.at(t) * (x - plan.states.at(t));
}

Vector LayeredPolicy::tracking_law(std::size_t t, const Vector &x) const {
  if (K_ff.empty()) throw InvalidArgument("tracking law is only available for linear models");
  const Eigen::Index q = reference.front().size();
  const Vector e = x - lift * reference[t];
  Vector mu = Vector::Zero(K_ff[t].cols());
  for (std::size_t j = t; j < reference.size(); ++j) {
    mu.segment(static_cast<Eigen::Index>(j - t) * q, q) = reference[j];
  }
  return -K_fb[t] * e - K_ff[t] * mu - nu[t];
}

namespace {

VectorSeq scaled(const VectorSeq &seq, double s) {
  VectorSeq out(seq.size());
  for (std::size_t t = 0; t < seq.size(); ++t) out[t] = s * seq[t];
  return out;
}

}  // namespace

AdmmResult admm_solve(const LayeredProblem &prob, const AdmmConfig &cfg) {
  prob.validate();
  cfg.validate();

  const std::size_t N = prob.horizon;
  const Eigen::Index m = prob.model.input_dim();
  const Eigen::Index q = prob.reference_dim();
  const Matrix C = prob.selector();
  const bool linear = prob.model.is_linear();
  const bool input_constrained = prob.input_bounds.has_value();

  AdmmResult result;
  AdmmState &s = result.state;
  AdmmDiagnostics &diag = result.diagnostics;

  s.rho = cfg.rho0;
  s.x = rollout(prob.model, prob.initial_state, VectorSeq(N, Vector::Zero(m)));
  s.r = interpolate(C * prob.initial_state, prob.cost.targets[N], N);
  s.v.assign(N + 1, Vector::Zero(q));
  if (input_constrained) {
    s.a.assign(N, Vector::Zero(m));
    s.v_a.assign(N, Vector::Zero(m));
  }

  TrackingProblem track;
  std::optional<RiccatiGains> gains;
  double gains_rho = 0.0;
  TrackingSolution last_tracking;
  IlqrResult last_ilqr;
  if (linear) {
    track.R = prob.R;
    track.reference = s.r;
    assign_linear_dynamics(track, prob.model);
    track.initial_state = prob.initial_state;
    track.output_selector = prob.output_selector;
  }

  // Feedback control layer: sets s.x, returns false on divergence.
  auto feedback = [&](int &inner, bool &inner_converged) {
    VectorSeq u;
    if (linear) {
      track.reference = s.r;
      track.dual = s.v;
      track.rho = s.rho;
      if (input_constrained) track.input_proximal = InputProximal{s.a, s.v_a};
      if (!gains || gains_rho != s.rho) {
        gains = riccati_gains(build_augmented(track), effective_input_weights(track));
        gains_rho = s.rho;
      }
      last_tracking = solve_tracking(track, &*gains);
      u = last_tracking.trajectory.inputs;
      inner = 1;
    } else {
      const QuadraticCost cost =
          input_constrained
              ? QuadraticCost::tracking(C, s.r, s.v, s.rho, prob.R, &s.a, &s.v_a)
              : QuadraticCost::tracking(C, s.r, s.v, s.rho, prob.R);
      IlqrOptions opts;
      opts.max_iters = cfg.max_inner;
      opts.tol = cfg.inner_tol;
      try {
        last_ilqr = ilqr_solve(prob.model, cost, prob.initial_state, s.x.inputs, opts);
      } catch (const DivergenceError &e) {
        diag.failure = std::string("feedback layer diverged: ") + e.what();
        return false;
      } catch (const NumericalError &e) {
        diag.failure = std::string("feedback layer failed: ") + e.what();
        return false;
      }
      u = last_ilqr.trajectory.inputs;
      inner = last_ilqr.iterations_used;
      inner_converged = last_ilqr.converged;
    }
    try {
      s.x = rollout(prob.model, prob.initial_state, u);
    } catch (const DivergenceError &e) {
      diag.failure = std::string("feedback layer diverged: ") + e.what();
      return false;
    }
    return true;
  };

  // First tracking solve aims at the interpolated r^0, starting from zero inputs.
  bool warm_ok = true;
  if (cfg.warm_start) {
    bool unused = true;
    warm_ok = feedback(diag.warm_start_iterations, unused);
  }

  for (int k = 1; warm_ok && k <= cfg.max_outer; ++k) {
    IterationRecord rec;
    rec.outer = k;
    rec.rho = s.rho;

    // Trajectory generation layer.
    const VectorSeq r_prev = s.r;
    const VectorSeq a_prev = s.a;
    VectorSeq anchor(N + 1);
    for (std::size_t t = 0; t <= N; ++t) anchor[t] = C * s.x.states[t] + s.v[t];
    try {
      s.r = prox_reference(prob.cost, anchor, s.rho, prob.constraints);
    } catch (const InfeasibleError &e) {
      throw InfeasibleError("trajectory layer at outer iteration " + std::to_string(k) + ": " +
                                e.what(),
                            e.timestep());
    }
    if (input_constrained) {
      VectorSeq w(N);
      for (std::size_t t = 0; t < N; ++t) w[t] = s.x.inputs[t] + s.v_a[t];
      s.a = prox_input(w, *prob.input_bounds);
    }

    if (!feedback(rec.inner_iterations, rec.inner_converged)) break;

    // Dual update.
    double primal_sq = 0.0;
    for (std::size_t t = 0; t <= N; ++t) {
      const Vector gap = C * s.x.states[t] - s.r[t];
      s.v[t] += gap;
      primal_sq += gap.squaredNorm();
    }
    double dual_sq = (s.rho * s.rho) * std::pow(stacked_distance(s.r, r_prev), 2);
    if (input_constrained) {
      for (std::size_t t = 0; t < N; ++t) {
        const Vector gap = s.x.inputs[t] - s.a[t];
        s.v_a[t] += gap;
        primal_sq += gap.squaredNorm();
      }
      dual_sq += (s.rho * s.rho) * std::pow(stacked_distance(s.a, a_prev), 2);
    }
    rec.primal = std::sqrt(primal_sq);
    rec.dual = std::sqrt(dual_sq);
    rec.dual_step = rec.primal;
    rec.objective = prob.objective(s.x);

    s.k = k;
    s.primal_history.push_back(rec.primal);
    s.dual_history.push_back(rec.dual);
    s.inner_iterations.push_back(rec.inner_iterations);
    diag.iterations.push_back(rec);

    if (primal_sq <= cfg.eps_primal && rec.dual <= cfg.eps_dual) {
      diag.converged = true;
      break;
    }

    if (cfg.adapt_rho) {
      RhoUpdate upd = update_rho(s.rho, rec.primal, rec.dual, cfg.mu, cfg.tau_incr, cfg.tau_decr);
      upd.rho = std::clamp(upd.rho, cfg.rho_min, cfg.rho_max);
      upd.rescale = s.rho / upd.rho;
      if (upd.rho != s.rho) {
        s.v = scaled(s.v, upd.rescale);
        if (input_constrained) s.v_a = scaled(s.v_a, upd.rescale);
        s.rho = upd.rho;
      }
    }
  }

  diag.outer_iterations = s.k;
  diag.total_iterations = iteration_count(s.inner_iterations) + diag.warm_start_iterations;
  diag.objective = prob.objective(s.x);

  LayeredPolicy &policy = result.policy;
  policy.reference = s.r;
  policy.plan = s.x;
  if (linear && s.k > 0) {
    policy.K_fb = last_tracking.riccati.K_fb;
    policy.K_ff = last_tracking.riccati.K_ff;
    policy.nu = last_tracking.riccati.nu;
    policy.lift = build_augmented(track).lift;
  } else if (!linear) {
    policy.K_fb = last_ilqr.feedback;
    policy.lift = Matrix::Identity(prob.model.state_dim(), prob.model.state_dim());
  }
  return result;
}

AdmmResult solve_stochastic(const LayeredProblem &prob, const AdmmConfig &cfg) {
  if (!prob.model.is_linear()) {
    throw UnsupportedCost("certainty-equivalent decomposition needs linear dynamics");
  }
  const Matrix &Q = prob.cost.weights.front();
  for (const auto &W : prob.cost.weights) {
    if (W != Q) {
      throw UnsupportedCost("certainty-equivalent policy needs a time-invariant quadratic weight");
    }
  }
  LayeredProblem deterministic = prob;
  deterministic.noise.reset();
  AdmmResult result = admm_solve(deterministic, cfg);

  const Matrix C = prob.selector();
  const Matrix C_x = C.transpose() * Q * C;
  MatrixSeq A;
  MatrixSeq B;
  for (std::size_t t = 0; t < prob.model.linear_stages(); ++t) {
    A.push_back(prob.model.A(t));
    B.push_back(prob.model.B(t));
  }
  if (prob.R.size() != 1) {
    throw UnsupportedCost("certainty-equivalent policy needs a time-invariant input weight");
  }
  result.policy.K_lqr = lqr_gain(A, B, C_x, prob.R.front(), prob.horizon);
  return result;
}

Trajectory simulate_policy(const DynamicsModel &model, const LayeredPolicy &policy,
                           const Vector &x0, const std::optional<NoiseModel> &noise,
                           std::uint64_t seed) {
  const std::size_t N = policy.plan.inputs.size();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Trajectory traj;
  traj.states.reserve(N + 1);
  traj.inputs.reserve(N);
  traj.states.push_back(x0);
  for (std::size_t t = 0; t < N; ++t) {
    Vector u = policy.action(t, traj.states[t]);
    Vector next = model.step(traj.states[t], u, t);
    if (noise) {
      const Matrix &H = noise->at(t);
      Vector w(H.cols());
      for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = gauss(rng);
      next += H * w;
    }
    check_divergence(next, t + 1);
    traj.inputs.push_back(std::move(u));
    traj.states.push_back(std::move(next));
  }
  return traj;
}

}  // namespace layered_ocp
