#pragma once

#include <string>

#include "layered_ocp/bench/experiments.hpp"

namespace layered_ocp::bench {

/// Reads a JSON object of run settings on top of `base`. Keys: experiment,
/// trials, seed, horizon, goal, rho, max_outer, eps_primal, eps_dual,
/// max_inner, adapt_rho, baseline_max_iters, out, format, threads.
/// Unknown keys and wrong types throw InvalidArgument.
ExperimentConfig merge_config_json(const std::string &text, ExperimentConfig base);

ExperimentConfig load_config_file(const std::string &path, ExperimentConfig base = {});

}  // namespace layered_ocp::bench
