#include "layered_ocp/bench/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <thread>

#include "layered_ocp/errors.hpp"
#include "layered_ocp/verify/oracles.hpp"
#include "layered_ocp/verify/suite.hpp"

namespace layered_ocp::bench {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kSpeedLimit = 7.0;

Matrix diag(std::initializer_list<double> d) {
  Vector v(static_cast<Eigen::Index>(d.size()));
  Eigen::Index i = 0;
  for (double x : d) v[i++] = x;
  return v.asDiagonal();
}

Vector vec(std::initializer_list<double> d) {
  Vector v(static_cast<Eigen::Index>(d.size()));
  Eigen::Index i = 0;
  for (double x : d) v[i++] = x;
  return v;
}

Matrix position_selector(Eigen::Index q, Eigen::Index n) {
  Matrix C = Matrix::Zero(q, n);
  C.leftCols(q).setIdentity();
  return C;
}

Box corridor_box(Eigen::Index dim, Eigen::Index coord, double lo, double hi) {
  Box b{Vector::Constant(dim, -kInf), Vector::Constant(dim, kInf)};
  b.lower[coord] = lo;
  b.upper[coord] = hi;
  return b;
}

bool has(const std::string &name, const std::string &part) {
  return name.find(part) != std::string::npos;
}

ExperimentSetup linear_setup(const ExperimentConfig &cfg) {
  const std::size_t N = cfg.horizon.value_or(20);
  const LayeredProblem p = verify::circle_problem(N, cfg.experiment == "linear-noise");
  ExperimentSetup s{cfg.experiment, p.model, p.cost};
  s.R = p.R;
  s.noise = p.noise;
  s.horizon = N;
  s.goal = cfg.goal.value_or(p.cost.targets[N]);
  s.goal_coords = {0, 1};
  s.fixed_initial = p.initial_state;
  s.admm.rho0 = 1.0;
  s.admm.eps_primal = 1e-12;
  s.admm.eps_dual = 1e-6;
  s.admm.max_outer = 5000;
  return s;
}

ExperimentSetup cartpole_setup(const ExperimentConfig &cfg) {
  const std::size_t N = cfg.horizon.value_or(40);
  const Vector goal = cfg.goal.value_or(vec({0.0, std::numbers::pi, 0.0, 0.0}));
  const Matrix Q = 0.1 * Matrix::Identity(4, 4);
  const Matrix QN = 1000.0 * Matrix::Identity(4, 4);
  ExperimentSetup s{cfg.experiment, make_cartpole(), ReferenceCost::goal(Q, QN, goal, N)};
  s.R = {0.01 * Matrix::Identity(1, 1)};
  s.horizon = N;
  s.goal = goal;
  s.goal_coords = {0, 1, 2, 3};
  s.distribution = Distribution::uniform;
  s.initial_offset = vec({0.0, std::numbers::pi - 0.5, 0.0, 0.0});
  s.admm.rho0 = 25.0;
  s.baseline_Q = Q;
  s.baseline_Q_terminal = QN;
  s.baseline_target = goal;
  return s;
}

ExperimentSetup unicycle_setup(const ExperimentConfig &cfg) {
  const std::string &name = cfg.experiment;
  const std::size_t N = cfg.horizon.value_or(20);
  const Vector goal = cfg.goal.value_or(vec({3.0, 2.0}));
  if (goal.size() != 2) throw InvalidArgument("unicycle goal must be (x, y)");
  const bool low_order = has(name, "low-order") || has(name, "obstacle");

  Matrix Q, QN;
  Vector target;
  if (low_order) {
    Q = 0.1 * Matrix::Identity(2, 2);
    QN = 1000.0 * Matrix::Identity(2, 2);
    target = goal;
  } else {
    Q = diag({0.1, 0.1, 0.0});
    QN = diag({1000.0, 1000.0, 0.0});
    target = vec({goal[0], goal[1], 0.0});
  }
  ExperimentSetup s{name, make_unicycle(), ReferenceCost::goal(Q, QN, target, N)};
  s.R = {0.01 * Matrix::Identity(2, 2)};
  s.horizon = N;
  s.goal = goal;
  s.goal_coords = {0, 1};
  s.initial_offset = Vector::Zero(3);
  s.admm.rho0 = 25.0;
  s.admm.max_outer = 1000;
  if (low_order) s.output_selector = position_selector(2, 3);
  const Eigen::Index q = low_order ? 2 : 3;
  if (has(name, "corridor")) {
    s.constraints = ConstraintSpec::switching(N, corridor_box(q, 0, 0.0, 1.0),
                                              corridor_box(q, 1, 1.5, 2.5));
  }
  if (has(name, "obstacle")) {
    s.constraints = ConstraintSpec::uniform(N, ObstacleRect{1.0, 0.5, 1.5, 1.0, 0, 1});
  }
  if (has(name, "vel")) {
    s.input_bounds = InputBox{vec({-kSpeedLimit, -kInf}), vec({kSpeedLimit, kInf})};
  }
  s.baseline_Q = diag({0.1, 0.1, 0.0});
  s.baseline_Q_terminal = diag({1000.0, 1000.0, 0.0});
  s.baseline_target = vec({goal[0], goal[1], 0.0});
  return s;
}

ExperimentSetup quadrotor_setup(const ExperimentConfig &cfg) {
  const std::string &name = cfg.experiment;
  const std::size_t N = cfg.horizon.value_or(40);
  const Vector goal = cfg.goal.value_or(vec({3.0, 2.0, 1.5}));
  if (goal.size() != 3) throw InvalidArgument("quadrotor goal must be (x, y, z)");
  const bool low_order = has(name, "low-order");

  Vector full_goal = Vector::Zero(12);
  full_goal.head(3) = goal;
  const Eigen::Index q = low_order ? 3 : 12;
  const Matrix Q = 0.1 * Matrix::Identity(q, q);
  const Matrix QN = 1000.0 * Matrix::Identity(q, q);
  ExperimentSetup s{name, make_quadrotor(),
                    ReferenceCost::goal(Q, QN, low_order ? goal : full_goal, N)};
  s.R = {0.01 * Matrix::Identity(4, 4)};
  s.horizon = N;
  s.goal = goal;
  s.goal_coords = {0, 1, 2};
  s.initial_offset = Vector::Zero(12);
  s.admm.rho0 = 25.0;
  s.admm.max_outer = 1000;
  if (low_order) s.output_selector = position_selector(3, 12);
  s.baseline_Q = 0.1 * Matrix::Identity(12, 12);
  s.baseline_Q_terminal = 1000.0 * Matrix::Identity(12, 12);
  s.baseline_target = full_goal;
  return s;
}

void apply_overrides(const ExperimentConfig &cfg, AdmmConfig &admm) {
  if (cfg.rho) admm.rho0 = *cfg.rho;
  if (cfg.max_outer) admm.max_outer = *cfg.max_outer;
  if (cfg.eps_primal) admm.eps_primal = *cfg.eps_primal;
  if (cfg.eps_dual) admm.eps_dual = *cfg.eps_dual;
  if (cfg.max_inner) admm.max_inner = *cfg.max_inner;
  if (cfg.adapt_rho) admm.adapt_rho = *cfg.adapt_rho;
  admm.seed = cfg.seed;
  admm.validate();
}

Outcome admm_outcome(const ExperimentSetup &setup, const AdmmResult &res) {
  Outcome o;
  o.trajectory = res.state.x;
  o.reference = res.state.r;
  o.actions = res.state.a;
  o.terminal = o.trajectory.states.back();
  o.distance = goal_distance(setup, o.terminal);
  o.success = !res.diagnostics.failure && is_success(o.distance);
  o.total_iterations = res.diagnostics.total_iterations;
  o.outer_iterations = res.diagnostics.outer_iterations;
  o.converged = res.diagnostics.converged;
  o.failure = res.diagnostics.failure;
  for (const auto &rec : res.diagnostics.iterations) {
    o.primal.push_back(rec.primal);
    o.dual.push_back(rec.dual);
    o.rho.push_back(rec.rho);
  }
  return o;
}

Outcome ilqr_baseline(const ExperimentSetup &setup, const Vector &x0, int max_iters) {
  const Eigen::Index n = setup.model.state_dim();
  const QuadraticCost cost =
      QuadraticCost::goal(Matrix::Identity(n, n), setup.baseline_target, setup.baseline_Q,
                          setup.baseline_Q_terminal, setup.R.front(), setup.horizon);
  IlqrOptions opts;
  opts.max_iters = max_iters;
  Outcome o;
  try {
    const IlqrResult res = ilqr_solve(setup.model, cost, x0,
                                      VectorSeq(setup.horizon, Vector::Zero(setup.model.input_dim())),
                                      opts);
    o.trajectory = res.trajectory;
    o.total_iterations = res.iterations_used;
    o.outer_iterations = res.iterations_used;
    o.converged = res.converged;
  } catch (const std::runtime_error &e) {
    o.failure = e.what();
    o.trajectory.states.assign(1, x0);
  }
  o.terminal = o.trajectory.states.back();
  o.distance = goal_distance(setup, o.terminal);
  o.success = !o.failure && is_success(o.distance);
  return o;
}

Outcome dense_baseline(const ExperimentSetup &setup, const verify::DenseSolution &sol) {
  Outcome o;
  // executed trajectory: the oracle's inputs replayed through the model
  o.trajectory = rollout(setup.model, sol.trajectory.states.front(), sol.trajectory.inputs);
  o.terminal = o.trajectory.states.back();
  o.distance = goal_distance(setup, o.terminal);
  o.success = is_success(o.distance);
  o.total_iterations = 1;
  o.outer_iterations = 1;
  o.converged = true;
  return o;
}

template <typename Fn>
void parallel_for(std::size_t count, unsigned threads, Fn fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = next++; i < count; i = next++) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto &th : pool) th.join();
  for (auto &e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

bool trajectories_feasible(const ExperimentSetup &setup, const std::vector<TrialRecord> &trials,
                           bool noisy) {
  for (const auto &tr : trials) {
    if (!noisy && !is_dynamically_feasible(setup.model, tr.admm.trajectory)) return false;
    if (!tr.baseline.failure && !is_dynamically_feasible(setup.model, tr.baseline.trajectory)) {
      return false;
    }
  }
  return true;
}

}  // namespace

Format parse_format(const std::string &s) {
  if (s == "csv") return Format::csv;
  if (s == "json") return Format::json;
  throw InvalidArgument("unknown format '" + s + "' (expected csv or json)");
}

std::string to_string(Format f) { return f == Format::csv ? "csv" : "json"; }

const std::vector<std::string> &experiment_names() {
  static const std::vector<std::string> names = {
      "linear-circle",
      "linear-noise",
      "cartpole",
      "unicycle",
      "unicycle-corridor",
      "unicycle-low-order",
      "unicycle-low-order-corridor",
      "unicycle-low-order-corridor-vel",
      "unicycle-obstacle",
      "quadrotor",
      "quadrotor-low-order",
  };
  return names;
}

bool is_known_experiment(const std::string &name) {
  const auto &names = experiment_names();
  return std::find(names.begin(), names.end(), name) != names.end();
}

void ExperimentConfig::validate() const {
  if (!is_known_experiment(experiment)) {
    throw InvalidArgument("unknown experiment '" + experiment + "'");
  }
  if (trials < 1) throw InvalidArgument("trials must be at least 1");
  if (horizon && *horizon < 1) throw InvalidArgument("horizon must be at least 1");
  if (baseline_max_iters < 1) throw InvalidArgument("baseline iteration cap must be positive");
}

LayeredProblem ExperimentSetup::problem(const Vector &x0) const {
  LayeredProblem p{model, cost, R, constraints, input_bounds, horizon, x0, output_selector, noise};
  return p;
}

ExperimentSetup make_experiment(const ExperimentConfig &cfg) {
  cfg.validate();
  ExperimentSetup s = [&] {
    if (has(cfg.experiment, "linear")) return linear_setup(cfg);
    if (cfg.experiment == "cartpole") return cartpole_setup(cfg);
    if (has(cfg.experiment, "unicycle")) return unicycle_setup(cfg);
    return quadrotor_setup(cfg);
  }();
  apply_overrides(cfg, s.admm);
  return s;
}

std::vector<Vector> sample_initial_conditions(Distribution dist, std::size_t n, Eigen::Index dim,
                                              std::uint64_t seed) {
  if (n < 1) throw InvalidArgument("need at least one sample");
  if (dim < 1) throw InvalidArgument("sample dimension must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Vector> out(n, Vector(dim));
  for (auto &v : out) {
    for (Eigen::Index i = 0; i < dim; ++i) {
      v[i] = dist == Distribution::uniform ? uniform(rng) : normal(rng);
    }
  }
  return out;
}

bool is_success(double distance, double radius) { return distance < radius; }

double success_rate(const std::vector<Outcome> &records) {
  if (records.empty()) throw InvalidArgument("success rate of an empty batch");
  const auto hits = std::count_if(records.begin(), records.end(),
                                  [](const Outcome &o) { return o.success; });
  return 100.0 * static_cast<double>(hits) / static_cast<double>(records.size());
}

Aggregate aggregate(const std::vector<Outcome> &records) {
  Aggregate a;
  a.trials = records.size();
  a.success_rate = success_rate(records);
  double sum = 0.0;
  for (const auto &o : records) sum += o.total_iterations;
  a.iterations_mean = sum / static_cast<double>(records.size());
  if (records.size() > 1) {
    double ss = 0.0;
    for (const auto &o : records) ss += std::pow(o.total_iterations - a.iterations_mean, 2);
    a.iterations_std = std::sqrt(ss / static_cast<double>(records.size() - 1));
  }
  return a;
}

double goal_distance(const ExperimentSetup &setup, const Vector &terminal) {
  double sq = 0.0;
  for (std::size_t i = 0; i < setup.goal_coords.size(); ++i) {
    sq += std::pow(terminal[setup.goal_coords[i]] - setup.goal[static_cast<Eigen::Index>(i)], 2);
  }
  return std::sqrt(sq);
}

bool ExperimentReport::all_checks_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check &c) { return c.passed; });
}

ExperimentReport run_experiment(const ExperimentConfig &cfg) {
  const ExperimentSetup setup = make_experiment(cfg);
  const bool linear = setup.model.is_linear();
  const bool noisy = setup.noise.has_value();

  ExperimentReport report;
  report.experiment = cfg.experiment;
  report.baseline = linear ? "dense-qp" : "ilqr";
  report.seed = cfg.seed;
  report.horizon = setup.horizon;
  report.goal = setup.goal;
  report.parameters = {
      {"rho0", setup.admm.rho0},
      {"eps_primal", setup.admm.eps_primal},
      {"eps_dual", setup.admm.eps_dual},
      {"max_outer", setup.admm.max_outer},
      {"max_inner", setup.admm.max_inner},
      {"adapt_rho", setup.admm.adapt_rho ? 1.0 : 0.0},
      {"baseline_max_iters", linear ? 0.0 : static_cast<double>(cfg.baseline_max_iters)},
      {"dt", setup.model.dt()},
  };

  std::vector<Vector> initial;
  if (setup.fixed_initial) {
    initial.assign(cfg.trials, *setup.fixed_initial);
  } else {
    initial = sample_initial_conditions(setup.distribution, cfg.trials, setup.model.state_dim(),
                                        cfg.seed);
    for (auto &x : initial) x += setup.initial_offset;
  }

  report.trials.resize(cfg.trials);
  std::vector<AdmmResult> plans(cfg.trials);
  parallel_for(cfg.trials, cfg.threads, [&](std::size_t i) {
    TrialRecord &rec = report.trials[i];
    rec.trial = i;
    rec.initial = initial[i];
    const LayeredProblem prob = setup.problem(initial[i]);
    if (noisy) {
      plans[i] = solve_stochastic(prob, setup.admm);
      rec.admm = admm_outcome(setup, plans[i]);
      rec.admm.trajectory = simulate_policy(setup.model, plans[i].policy, initial[i], setup.noise,
                                            cfg.seed + i);
      rec.admm.terminal = rec.admm.trajectory.states.back();
      rec.admm.distance = goal_distance(setup, rec.admm.terminal);
      rec.admm.success = is_success(rec.admm.distance);
    } else {
      plans[i] = admm_solve(prob, setup.admm);
      rec.admm = admm_outcome(setup, plans[i]);
    }
    if (linear) {
      LayeredProblem det = prob;
      det.noise.reset();
      rec.baseline = dense_baseline(setup, verify::solve_kkt(verify::dense_from_layered(det)));
    } else {
      rec.baseline = ilqr_baseline(setup, initial[i], cfg.baseline_max_iters);
    }
  });

  std::vector<Outcome> admm_runs, base_runs;
  for (const auto &t : report.trials) {
    admm_runs.push_back(t.admm);
    base_runs.push_back(t.baseline);
  }
  report.admm = aggregate(admm_runs);
  report.baseline_aggregate = aggregate(base_runs);

  report.checks.push_back({"trajectories-feasible", trajectories_feasible(setup, report.trials, noisy),
                           noisy ? "baseline trajectories only; executed runs carry process noise"
                                 : "every dumped trajectory replays through the model bit for bit"});

  if (linear) {
    const LayeredProblem prob = setup.problem(initial.front());
    double worst = 0.0;
    bool primal_ok = true;
    for (std::size_t i = 0; i < report.trials.size(); ++i) {
      const double admm_obj = prob.objective(plans[i].state.x);
      const double oracle_obj = prob.objective(report.trials[i].baseline.trajectory);
      worst = std::max(worst, verify::relative_gap(admm_obj, oracle_obj));
      const auto &hist = plans[i].state.primal_history;
      primal_ok = primal_ok && !hist.empty() && hist.back() * hist.back() <= 1e-2;
    }
    report.checks.push_back({"oracle-match", worst <= 1e-4 && primal_ok,
                             "max relative objective gap " + std::to_string(worst)});
  }
  if (noisy) {
    bool identical = true;
    for (std::size_t i = 1; i < plans.size(); ++i) {
      for (std::size_t t = 0; t < plans[i].policy.plan.states.size(); ++t) {
        identical = identical && plans[i].policy.plan.states[t] == plans[0].policy.plan.states[t];
      }
    }
    report.checks.push_back({"plan-identical-across-seeds", identical, ""});
  }
  if (!setup.constraints.empty()) {
    bool ok = true;
    for (const auto &t : report.trials) ok = ok && satisfies(setup.constraints, t.admm.reference);
    report.checks.push_back({"reference-constraints", ok, "exact, no tolerance"});
  }
  if (setup.input_bounds) {
    bool ok = true;
    for (const auto &t : report.trials) {
      for (const auto &a : t.admm.actions) {
        ok = ok && (a.array() >= setup.input_bounds->lower.array()).all() &&
             (a.array() <= setup.input_bounds->upper.array()).all();
      }
    }
    report.checks.push_back({"action-bounds", ok, "exact, no tolerance"});
  }
  return report;
}

}  // namespace layered_ocp::bench
