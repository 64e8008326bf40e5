#include "layered_ocp/verify/suite.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "layered_ocp/verify/oracles.hpp"

namespace layered_ocp::verify {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

Matrix randn(std::mt19937_64 &rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Matrix M(r, c);
  for (Eigen::Index j = 0; j < c; ++j) {
    for (Eigen::Index i = 0; i < r; ++i) M(i, j) = g(rng);
  }
  return M;
}

Vector randv(std::mt19937_64 &rng, Eigen::Index n, double scale = 1.0) {
  return randn(rng, n, 1, scale);
}

int uniform_int(std::mt19937_64 &rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

double uniform(std::mt19937_64 &rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Matrix random_spd(std::mt19937_64 &rng, Eigen::Index n, double floor) {
  const Matrix M = randn(rng, n, n);
  return M * M.transpose() / static_cast<double>(n) + floor * Matrix::Identity(n, n);
}

// A = I + noise, rescaled so the spectral radius stays below `limit`.
Matrix random_dynamics(std::mt19937_64 &rng, Eigen::Index n, double limit) {
  Matrix A = Matrix::Identity(n, n) + randn(rng, n, n, 0.3);
  const double radius = Eigen::EigenSolver<Matrix>(A, false).eigenvalues().cwiseAbs().maxCoeff();
  if (radius > limit) A *= limit / radius;
  return A;
}

double max_rel_diff(const VectorSeq &a, const VectorSeq &b) {
  double worst = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    const double scale = std::max({a[t].norm(), b[t].norm(), 1.0});
    worst = std::max(worst, (a[t] - b[t]).norm() / scale);
  }
  return worst;
}

double max_abs_diff(const VectorSeq &a, const VectorSeq &b) {
  double worst = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    worst = std::max(worst, (a[t] - b[t]).cwiseAbs().maxCoeff());
  }
  return worst;
}

std::string fmt(double x) {
  std::ostringstream s;
  s.precision(3);
  s << std::scientific << x;
  return s.str();
}

// Sum over columns in index order so both sides share one evaluation order.
Vector ordered_product(const Matrix &M, const Vector &z, Eigen::Index col_begin, Vector acc) {
  for (Eigen::Index j = 0; j < z.size(); ++j) {
    for (Eigen::Index i = 0; i < M.rows(); ++i) acc[i] += M(i, col_begin + j) * z[j];
  }
  return acc;
}

}  // namespace

TrackingProblem random_tracking_problem(std::mt19937_64 &rng) {
  const Eigen::Index n = uniform_int(rng, 1, 4);
  const Eigen::Index m = uniform_int(rng, 1, 2);
  const std::size_t N = static_cast<std::size_t>(uniform_int(rng, 1, 20));
  TrackingProblem p;
  for (std::size_t t = 0; t < N; ++t) {
    p.A.push_back(random_dynamics(rng, n, 1.1));
    p.B.push_back(randn(rng, n, m));
    p.R.push_back(random_spd(rng, m, 0.05));
  }
  Eigen::Index q = n;
  if (uniform_int(rng, 0, 1) == 1) {
    q = uniform_int(rng, 1, static_cast<int>(n));
    p.output_selector = randn(rng, q, n);
  }
  for (std::size_t t = 0; t <= N; ++t) {
    p.reference.push_back(randv(rng, q));
    p.dual.push_back(randv(rng, q, 0.5));
  }
  p.rho = std::exp(uniform(rng, std::log(0.1), std::log(50.0)));
  p.initial_state = randv(rng, n);
  if (uniform_int(rng, 0, 2) == 0) {
    InputProximal prox;
    for (std::size_t t = 0; t < N; ++t) {
      prox.action.push_back(randv(rng, m));
      prox.dual.push_back(randv(rng, m, 0.5));
    }
    p.input_proximal = prox;
  }
  return p;
}

LayeredProblem random_convex_problem(std::mt19937_64 &rng, bool input_box) {
  const Eigen::Index n = uniform_int(rng, 2, 3);
  const Eigen::Index m = uniform_int(rng, 1, 2);
  const std::size_t N = static_cast<std::size_t>(uniform_int(rng, 5, 15));
  const Matrix A = random_dynamics(rng, n, 1.0);
  const Matrix B = randn(rng, n, m);
  VectorSeq targets;
  for (std::size_t t = 0; t <= N; ++t) targets.push_back(randv(rng, n, 2.0));
  ReferenceCost cost = ReferenceCost::tracking(random_spd(rng, n, 0.1), targets);
  LayeredProblem p{make_linear(A, B), cost, {random_spd(rng, m, 0.05)}, ConstraintSpec{},
                   std::nullopt, N, randv(rng, n), std::nullopt, std::nullopt};
  if (input_box) p.input_bounds = InputBox::symmetric(Vector::Constant(m, uniform(rng, 0.2, 0.8)));
  return p;
}

LayeredProblem circle_problem(std::size_t horizon, bool noisy) {
  Matrix A(2, 2);
  A << 1.0, 1.0, 0.0, 1.0;
  VectorSeq circle(horizon + 1);
  for (std::size_t t = 0; t <= horizon; ++t) {
    const double w = 0.5 * static_cast<double>(t);
    circle[t] = Vector(2);
    circle[t] << 2.0 * std::cos(w), 2.0 * std::sin(w);
  }
  LayeredProblem p{make_linear(A, Matrix::Identity(2, 2)),
                   ReferenceCost::tracking(Matrix::Identity(2, 2), circle),
                   {0.001 * Matrix::Identity(2, 2)},
                   ConstraintSpec{},
                   std::nullopt,
                   horizon,
                   Vector::Zero(2),
                   std::nullopt,
                   std::nullopt};
  if (noisy) p.noise = NoiseModel{{0.1 * Matrix::Identity(2, 2)}};
  return p;
}

CheckResult check_tracking_oracle(int instances, std::uint64_t seed) {
  const auto start = Clock::now();
  std::mt19937_64 rng(seed);
  double worst_obj = 0.0, worst_traj = 0.0, worst_value = 0.0;
  for (int i = 0; i < instances; ++i) {
    const TrackingProblem p = random_tracking_problem(rng);
    const TrackingSolution sol = solve_tracking(p);
    const DenseSolution oracle = solve_kkt(dense_from_tracking(p));
    worst_obj = std::max(worst_obj, relative_gap(sol.objective, oracle.objective));
    worst_traj = std::max({worst_traj, max_rel_diff(sol.trajectory.states, oracle.trajectory.states),
                           max_rel_diff(sol.trajectory.inputs, oracle.trajectory.inputs)});
    const double realized = tracking_objective(p, sol.trajectory);
    worst_value = std::max(worst_value, relative_gap(sol.riccati.value(sol.z0, 0), realized));
  }
  CheckResult r{"tracking-lqr-oracle", worst_obj <= 1e-6 && worst_traj <= 1e-6 && worst_value <= 1e-8,
                "objective gap " + fmt(worst_obj) + ", trajectory gap " + fmt(worst_traj) +
                    ", value-function gap " + fmt(worst_value),
                0.0};
  r.seconds = seconds_since(start);
  return r;
}

CheckResult check_decomposition(int instances, int samples, std::uint64_t seed) {
  const auto start = Clock::now();
  std::mt19937_64 rng(seed);
  bool selectors_exact = true, gains_exact = true, law_exact = true;
  double worst_eigen = 0.0;
  for (int i = 0; i < instances; ++i) {
    const TrackingProblem p = random_tracking_problem(rng);
    const AugmentedSystem aug = build_augmented(p);
    RiccatiSolution sol = solve_riccati(aug, effective_input_weights(p));
    decompose_gains(sol, aug.F, aug.G);
    const Matrix sum = aug.F.transpose() * aug.F + aug.G.transpose() * aug.G;
    selectors_exact = selectors_exact && sum == Matrix::Identity(aug.dim(), aug.dim());
    const Eigen::Index ne = aug.F.rows();
    const Eigen::Index nm = aug.G.rows();
    for (std::size_t t = 0; t < sol.K.size(); ++t) {
      const Matrix &K = sol.K[t];
      gains_exact = gains_exact && sol.K_fb[t] == K.leftCols(ne) && sol.K_ff[t] == K.rightCols(nm);
      for (int s = 0; s < samples; ++s) {
        const Vector z = randv(rng, aug.dim());
        const Vector e = aug.F * z;
        const Vector mu = aug.G * z;
        const Vector zero = Vector::Zero(K.rows());
        // -K_fb e - K_ff mu - nu against -K z - nu
        const Vector split = -ordered_product(K, mu, ne, ordered_product(K, e, 0, zero)) - sol.nu[t];
        const Vector whole = -ordered_product(K, z, 0, zero) - sol.nu[t];
        law_exact = law_exact && split == whole;
        const Vector eig = -sol.K_fb[t] * e - sol.K_ff[t] * mu - sol.nu[t];
        const Vector eig_whole = -K * z - sol.nu[t];
        worst_eigen = std::max(worst_eigen, (eig - eig_whole).norm() /
                                                std::max(1.0, eig_whole.norm()));
      }
    }
  }
  CheckResult r{"decomposition-identity", selectors_exact && gains_exact && law_exact &&
                                              worst_eigen <= 1e-12,
                std::string("F'F+G'G=I ") + (selectors_exact ? "exact" : "NOT exact") +
                    ", gain blocks " + (gains_exact ? "exact" : "NOT exact") + ", law " +
                    (law_exact ? "exact" : "NOT exact") + ", blocked-product gap " +
                    fmt(worst_eigen),
                0.0};
  r.seconds = seconds_since(start);
  return r;
}

CheckResult check_linear_exactness() {
  const auto start = Clock::now();
  const LayeredProblem p = circle_problem();
  AdmmConfig cfg;
  cfg.eps_primal = 1e-12;
  cfg.eps_dual = 1e-6;
  cfg.max_outer = 5000;
  const AdmmResult res = admm_solve(p, cfg);
  const DenseSolution oracle = solve_kkt(dense_from_layered(p));
  const double admm_obj = p.objective(res.state.x);
  const double oracle_obj = p.objective(oracle.trajectory);
  const double gap = relative_gap(admm_obj, oracle_obj);
  const double primal_sq = std::pow(res.state.primal_history.back(), 2);
  CheckResult r{"linear-exactness", false,
                "objective " + fmt(admm_obj) + " vs oracle " + fmt(oracle_obj) + " (gap " +
                    fmt(gap) + "), primal^2 " + fmt(primal_sq) + ", outer iterations " +
                    std::to_string(res.diagnostics.outer_iterations),
                0.0};
  r.seconds = seconds_since(start);
  r.passed = res.diagnostics.converged && primal_sq <= 1e-2 && gap <= 1e-4 && r.seconds < 5.0;
  return r;
}

CheckResult check_convex_convergence(int instances, std::uint64_t seed) {
  const auto start = Clock::now();
  std::mt19937_64 rng(seed);
  AdmmConfig cfg;
  cfg.eps_primal = 1e-12;
  cfg.eps_dual = 1e-6;
  cfg.max_outer = 20000;
  bool ok = true;
  double worst_gap = 0.0, worst_primal = 0.0, worst_step = 0.0;
  int unconverged = 0;
  for (int i = 0; i < instances; ++i) {
    const bool boxed = i % 2 == 1;
    const LayeredProblem p = random_convex_problem(rng, boxed);
    const AdmmResult res = admm_solve(p, cfg);
    const DenseLq lq = dense_from_layered([&] {
      LayeredProblem q = p;
      q.input_bounds.reset();
      return q;
    }());
    const DenseSolution oracle = boxed ? solve_input_box(lq, *p.input_bounds) : solve_kkt(lq);
    const double gap = relative_gap(p.objective(res.state.x), oracle.objective);
    const double primal = res.state.primal_history.back();
    const double step = res.diagnostics.iterations.back().dual_step;
    worst_gap = std::max(worst_gap, gap);
    worst_primal = std::max(worst_primal, primal * primal);
    worst_step = std::max(worst_step, step);
    if (!res.diagnostics.converged) ++unconverged;
    ok = ok && res.diagnostics.converged && gap <= 1e-4 && step <= 1e-3;
  }
  CheckResult r{"convex-convergence", ok,
                "max objective gap " + fmt(worst_gap) + ", max primal^2 " + fmt(worst_primal) +
                    ", max ||v^k - v^{k-1}|| " + fmt(worst_step) + ", unconverged " +
                    std::to_string(unconverged),
                0.0};
  r.seconds = seconds_since(start);
  return r;
}

CheckResult check_certainty_equivalence(int rollouts, std::uint64_t seed) {
  const auto start = Clock::now();
  const LayeredProblem p = circle_problem(20, true);
  AdmmConfig cfg;
  cfg.eps_primal = 1e-12;
  cfg.eps_dual = 1e-6;
  cfg.max_outer = 5000;
  AdmmConfig cfg_other = cfg;
  cfg_other.seed = seed + 1;
  cfg.seed = seed;
  const AdmmResult a = solve_stochastic(p, cfg);
  const AdmmResult b = solve_stochastic(p, cfg_other);
  bool identical = true;
  for (std::size_t t = 0; t < a.policy.plan.states.size(); ++t) {
    identical = identical && a.policy.plan.states[t] == b.policy.plan.states[t];
  }
  for (std::size_t t = 0; t < a.policy.plan.inputs.size(); ++t) {
    identical = identical && a.policy.plan.inputs[t] == b.policy.plan.inputs[t];
  }
  const Trajectory noiseless = simulate_policy(p.model, a.policy, p.initial_state, std::nullopt, 0);
  bool reproduces = true;
  for (std::size_t t = 0; t < noiseless.states.size(); ++t) {
    reproduces = reproduces && noiseless.states[t] == a.policy.plan.states[t];
  }

  const std::size_t N = p.horizon;
  VectorSeq sum(N + 1, Vector::Zero(2)), sumsq(N + 1, Vector::Zero(2));
  for (int k = 0; k < rollouts; ++k) {
    const Trajectory x = simulate_policy(p.model, a.policy, p.initial_state, p.noise,
                                         seed + static_cast<std::uint64_t>(k));
    for (std::size_t t = 0; t <= N; ++t) {
      sum[t] += x.states[t];
      sumsq[t] += x.states[t].cwiseAbs2();
    }
  }
  const double K = static_cast<double>(rollouts);
  int outside = 0;
  double worst_z = 0.0;
  for (std::size_t t = 1; t <= N; ++t) {
    const Vector mean = sum[t] / K;
    const Vector var = (sumsq[t] - K * mean.cwiseAbs2()) / (K - 1.0);
    for (Eigen::Index i = 0; i < 2; ++i) {
      const double se = std::sqrt(var[i] / K);
      const double z = std::abs(mean[i] - a.policy.plan.states[t][i]) / se;
      worst_z = std::max(worst_z, z);
      if (z > 3.0) ++outside;
    }
  }
  CheckResult r{"certainty-equivalence", identical && reproduces && outside == 0,
                std::string("plan ") + (identical ? "bit-identical" : "DIFFERS") +
                    " across seeds, noiseless replay " + (reproduces ? "exact" : "NOT exact") +
                    ", worst |mean - x^d| / SE " + fmt(worst_z) + " over " +
                    std::to_string(rollouts) + " rollouts",
                0.0};
  r.seconds = seconds_since(start);
  return r;
}

CheckResult check_obstacle_prox(int anchors, std::uint64_t seed) {
  const auto start = Clock::now();
  std::mt19937_64 rng(seed);
  const ObstacleRect rect{1.0, 0.5, 1.5, 1.0, 0, 1};
  Vector goal(2);
  goal << 3.0, 2.0;
  const std::size_t N = 20;
  const ReferenceCost cost =
      ReferenceCost::goal(0.1 * Matrix::Identity(2, 2), 1000.0 * Matrix::Identity(2, 2), goal, N);
  int mismatches = 0;
  bool outside = true;
  double worst_dist = 0.0, worst_value = 0.0;
  for (int k = 0; k < anchors; ++k) {
    Vector anchor(2);
    anchor << uniform(rng, 0.5, 2.0), uniform(rng, 0.0, 1.5);
    const std::size_t t = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(N) - 1));
    const double rho = std::exp(uniform(rng, std::log(0.5), std::log(50.0)));
    const Vector r = prox_stage(cost, t, anchor, rho, rect);
    outside = outside && satisfies(StageConstraint{rect}, r);
    const GridResult grid = grid_search_obstacle(cost, t, anchor, rho, rect, 1e-3);
    const double v = prox_objective(cost, t, anchor, rho, r);
    const double dist = (r - grid.point).norm();
    const double dv = (grid.value - v) / std::max(1.0, std::abs(v));
    // exact minimizer: never worse than a grid point, and within one cell of the best one
    const bool match = v <= grid.value + 1e-12 && (dist <= 2e-3 || std::abs(dv) <= 1e-5);
    if (!match) ++mismatches;
    worst_dist = std::max(worst_dist, dist);
    worst_value = std::max(worst_value, dv);
  }
  CheckResult r{"obstacle-prox-grid", mismatches == 0 && outside,
                std::to_string(anchors - mismatches) + "/" + std::to_string(anchors) +
                    " anchors match, max point distance " + fmt(worst_dist) +
                    ", max value excess of grid " + fmt(worst_value),
                0.0};
  r.seconds = seconds_since(start);
  return r;
}

CheckResult check_rho_consistency() {
  const auto start = Clock::now();
  const LayeredProblem p = circle_problem();
  bool ok = true;
  std::string detail;
  // starting away from the balanced penalty forces the adaptive run to rescale
  for (const double rho0 : {0.05, 20.0}) {
    AdmmConfig adaptive;
    adaptive.rho0 = rho0;
    adaptive.eps_primal = 1e-12;
    adaptive.eps_dual = 1e-6;
    adaptive.max_outer = 20000;
    AdmmConfig fixed = adaptive;
    fixed.adapt_rho = false;
    const AdmmResult a = admm_solve(p, adaptive);
    const AdmmResult b = admm_solve(p, fixed);
    const double dr = max_abs_diff(a.state.r, b.state.r);
    const double dx = max_abs_diff(a.state.x.states, b.state.x.states);
    const double du = max_abs_diff(a.state.x.inputs, b.state.x.inputs);
    const double worst = std::max({dr, dx, du});
    ok = ok && a.diagnostics.converged && b.diagnostics.converged && worst <= 1e-4 &&
         a.state.rho != rho0;
    if (!detail.empty()) detail += "; ";
    detail += "rho0 " + fmt(rho0) + ": max |diff| " + fmt(worst) + ", rho " + fmt(a.state.rho) +
              " after " + std::to_string(a.diagnostics.outer_iterations) + " vs " +
              std::to_string(b.diagnostics.outer_iterations) + " outer";
  }
  CheckResult r{"rho-consistency", ok, detail, 0.0};
  r.seconds = seconds_since(start);
  return r;
}

std::vector<CheckResult> run_oracle_suite(std::uint64_t seed) {
  return {
      check_linear_exactness(),
      check_tracking_oracle(50, seed),
      check_decomposition(50, 100, seed + 1),
      check_convex_convergence(10, seed + 2),
      check_certainty_equivalence(10000, seed + 3),
      check_obstacle_prox(100, seed + 4),
      check_rho_consistency(),
  };
}

}  // namespace layered_ocp::verify
