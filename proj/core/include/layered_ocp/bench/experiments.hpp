#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "layered_ocp/layered_admm.hpp"

namespace layered_ocp::bench {

enum class Format { csv, json };
enum class Distribution { uniform, normal };

Format parse_format(const std::string &s);
std::string to_string(Format f);

/// Experiments known to `run`.
const std::vector<std::string> &experiment_names();
bool is_known_experiment(const std::string &name);

struct ExperimentConfig {
  std::string experiment;
  std::size_t trials = 20;
  std::uint64_t seed = 0;
  std::optional<std::size_t> horizon;
  std::optional<Vector> goal;
  // AdmmConfig overrides on top of the experiment's defaults
  std::optional<double> rho;
  std::optional<int> max_outer;
  std::optional<double> eps_primal;
  std::optional<double> eps_dual;
  std::optional<int> max_inner;
  std::optional<bool> adapt_rho;
  int baseline_max_iters = 200;
  std::string out;
  Format format = Format::csv;
  unsigned threads = 0;  // 0 = hardware concurrency

  void validate() const;
};

/// Everything that defines one benchmark, before initial conditions are drawn.
struct ExperimentSetup {
  ExperimentSetup(std::string name_, DynamicsModel model_, ReferenceCost cost_)
      : name(std::move(name_)), model(std::move(model_)), cost(std::move(cost_)) {}

  std::string name;
  DynamicsModel model;
  ReferenceCost cost;
  MatrixSeq R;
  ConstraintSpec constraints;
  std::optional<InputBox> input_bounds;
  std::optional<Matrix> output_selector;
  std::optional<NoiseModel> noise;
  std::size_t horizon = 0;
  Vector goal;
  std::vector<Eigen::Index> goal_coords;  // state coordinates compared against goal
  Distribution distribution = Distribution::normal;
  Vector initial_offset;  // added to every sample
  std::optional<Vector> fixed_initial;
  AdmmConfig admm;
  // iLQR baseline: state-space cost on the full state
  Matrix baseline_Q;
  Matrix baseline_Q_terminal;
  Vector baseline_target;

  LayeredProblem problem(const Vector &x0) const;
};

ExperimentSetup make_experiment(const ExperimentConfig &cfg);

std::vector<Vector> sample_initial_conditions(Distribution dist, std::size_t n, Eigen::Index dim,
                                              std::uint64_t seed);

struct Outcome {
  Vector terminal;
  double distance = 0.0;
  bool success = false;
  int total_iterations = 0;
  int outer_iterations = 0;
  bool converged = false;
  std::optional<std::string> failure;
  std::vector<double> primal;  // per outer iteration (empty for the baseline)
  std::vector<double> dual;
  std::vector<double> rho;
  Trajectory trajectory;
  VectorSeq reference;  // empty for the baseline
  VectorSeq actions;    // redundant action variable, input-constrained runs only
};

struct TrialRecord {
  std::size_t trial = 0;
  Vector initial;
  Outcome admm;
  Outcome baseline;
};

struct Aggregate {
  std::size_t trials = 0;
  double success_rate = 0.0;
  double iterations_mean = 0.0;
  double iterations_std = 0.0;
};

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ExperimentReport {
  std::string experiment;
  std::string baseline;  // "ilqr" or "dense-qp"
  std::uint64_t seed = 0;
  std::size_t horizon = 0;
  Vector goal;
  std::map<std::string, double> parameters;
  std::vector<TrialRecord> trials;
  Aggregate admm;
  Aggregate baseline_aggregate;
  std::vector<Check> checks;

  bool all_checks_passed() const;
};

/// Terminal success: ||terminal - goal|| < radius (strict).
bool is_success(double distance, double radius = 0.5);

/// 100 * successes / records. Throws InvalidArgument when empty.
double success_rate(const std::vector<Outcome> &records);

Aggregate aggregate(const std::vector<Outcome> &records);

double goal_distance(const ExperimentSetup &setup, const Vector &terminal);

ExperimentReport run_experiment(const ExperimentConfig &cfg);

}  // namespace layered_ocp::bench
