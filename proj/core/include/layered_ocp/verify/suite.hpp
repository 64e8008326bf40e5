#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "layered_ocp/layered_admm.hpp"
#include "layered_ocp/tracking_lqr.hpp"

namespace layered_ocp::verify {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

/// Random LTV tracking instance: n <= 4, m <= 2, N <= 20, sometimes with an
/// output selector and an input proximal term.
TrackingProblem random_tracking_problem(std::mt19937_64 &rng);

/// Random convex instance of the full problem on a linear model, optionally
/// with a symmetric input box.
LayeredProblem random_convex_problem(std::mt19937_64 &rng, bool input_box);

/// The 2-D double-integrator circle benchmark (N = 20, omega = 0.5, R = 0.001 I).
LayeredProblem circle_problem(std::size_t horizon = 20, bool noisy = false);

CheckResult check_tracking_oracle(int instances, std::uint64_t seed);
CheckResult check_decomposition(int instances, int samples, std::uint64_t seed);
CheckResult check_linear_exactness();
CheckResult check_convex_convergence(int instances, std::uint64_t seed);
CheckResult check_certainty_equivalence(int rollouts, std::uint64_t seed);
CheckResult check_obstacle_prox(int anchors, std::uint64_t seed);
CheckResult check_rho_consistency();

/// Everything above with the default sizes.
std::vector<CheckResult> run_oracle_suite(std::uint64_t seed = 42);

}  // namespace layered_ocp::verify
