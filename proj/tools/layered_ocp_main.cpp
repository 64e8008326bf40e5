#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "layered_ocp/bench/config.hpp"
#include "layered_ocp/bench/experiments.hpp"
#include "layered_ocp/bench/report.hpp"
#include "layered_ocp/errors.hpp"
#include "layered_ocp/verify/suite.hpp"

namespace {

using namespace layered_ocp;

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kUsage = 2;

struct RunFlags {
  std::string experiment;
  std::string config;
  std::optional<std::size_t> trials;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> horizon;
  std::optional<std::string> out;
  std::optional<std::string> format;
  std::optional<double> rho;
  std::optional<int> max_outer;
  std::optional<double> eps_primal;
  std::optional<double> eps_dual;
  std::optional<int> max_inner;
  std::optional<unsigned> threads;
  bool fixed_rho = false;
};

bench::ExperimentConfig build_config(const RunFlags &f) {
  bench::ExperimentConfig cfg;
  if (!f.config.empty()) cfg = bench::load_config_file(f.config, cfg);
  if (!f.experiment.empty()) cfg.experiment = f.experiment;
  if (f.trials) cfg.trials = *f.trials;
  if (f.seed) cfg.seed = *f.seed;
  if (f.horizon) cfg.horizon = *f.horizon;
  if (f.out) cfg.out = *f.out;
  if (f.format) cfg.format = bench::parse_format(*f.format);
  if (f.rho) cfg.rho = *f.rho;
  if (f.max_outer) cfg.max_outer = *f.max_outer;
  if (f.eps_primal) cfg.eps_primal = *f.eps_primal;
  if (f.eps_dual) cfg.eps_dual = *f.eps_dual;
  if (f.max_inner) cfg.max_inner = *f.max_inner;
  if (f.threads) cfg.threads = *f.threads;
  if (f.fixed_rho) cfg.adapt_rho = false;
  if (cfg.experiment.empty()) throw InvalidArgument("no experiment given");
  cfg.validate();
  return cfg;
}

void print_summary(const bench::ExperimentReport &r) {
  std::printf("experiment   %s (%zu trials, seed %llu, horizon %zu)\n", r.experiment.c_str(),
              r.trials.size(), static_cast<unsigned long long>(r.seed), r.horizon);
  std::printf("admm         success %5.1f%%  iterations %.1f +- %.1f\n", r.admm.success_rate,
              r.admm.iterations_mean, r.admm.iterations_std);
  std::printf("%-12s success %5.1f%%  iterations %.1f +- %.1f\n", r.baseline.c_str(),
              r.baseline_aggregate.success_rate, r.baseline_aggregate.iterations_mean,
              r.baseline_aggregate.iterations_std);
  for (const auto &c : r.checks) {
    std::printf("check        %-28s %s  %s\n", c.name.c_str(), c.passed ? "PASS" : "FAIL",
                c.detail.c_str());
  }
}

int run(const RunFlags &flags) {
  const bench::ExperimentConfig cfg = build_config(flags);
  const bench::ExperimentReport report = bench::run_experiment(cfg);
  print_summary(report);
  if (!cfg.out.empty()) {
    for (const auto &p : bench::write_report(report, cfg.out, cfg.format)) {
      std::printf("wrote        %s\n", p.c_str());
    }
  }
  return report.all_checks_passed() ? kOk : kFailed;
}

int run_verify(std::uint64_t seed) {
  bool ok = true;
  for (const auto &c : verify::run_oracle_suite(seed)) {
    std::printf("%s  %-24s %7.2fs  %s\n", c.passed ? "PASS" : "FAIL", c.name.c_str(), c.seconds,
                c.detail.c_str());
    ok = ok && c.passed;
  }
  return ok ? kOk : kFailed;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Layered trajectory-generation / feedback-control solver and benchmarks"};
  app.require_subcommand(1);

  RunFlags flags;
  auto *run_cmd = app.add_subcommand("run", "Run one benchmark experiment");
  run_cmd->add_option("experiment", flags.experiment, "Experiment name (see `list`)");
  run_cmd->add_option("--config", flags.config, "JSON file with run settings")
      ->check(CLI::ExistingFile);
  run_cmd->add_option("--trials", flags.trials, "Number of trials")->check(CLI::PositiveNumber);
  run_cmd->add_option("--seed", flags.seed, "Seed for initial conditions");
  run_cmd->add_option("--horizon", flags.horizon, "Horizon N")->check(CLI::PositiveNumber);
  run_cmd->add_option("--out", flags.out, "Report path");
  run_cmd->add_option("--format", flags.format, "csv or json")
      ->check(CLI::IsMember({"csv", "json"}));
  run_cmd->add_option("--rho", flags.rho, "Initial penalty")->check(CLI::PositiveNumber);
  run_cmd->add_option("--max-outer", flags.max_outer, "Outer iteration cap")
      ->check(CLI::PositiveNumber);
  run_cmd->add_option("--eps-primal", flags.eps_primal, "Bound on the squared primal residual")
      ->check(CLI::PositiveNumber);
  run_cmd->add_option("--eps-dual", flags.eps_dual, "Bound on the dual residual")
      ->check(CLI::PositiveNumber);
  run_cmd->add_option("--max-inner", flags.max_inner, "iLQR iterations per outer step")
      ->check(CLI::PositiveNumber);
  run_cmd->add_option("--threads", flags.threads, "Worker threads (0 = all cores)");
  run_cmd->add_flag("--fixed-rho", flags.fixed_rho, "Disable penalty adaptation");

  std::uint64_t verify_seed = 42;
  auto *verify_cmd = app.add_subcommand("verify", "Run the oracle-equivalence suite");
  verify_cmd->add_option("--seed", verify_seed, "Seed for random instances");

  app.add_subcommand("list", "List experiment names");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (run_cmd->parsed()) return run(flags);
    if (verify_cmd->parsed()) return run_verify(verify_seed);
    for (const auto &name : bench::experiment_names()) std::printf("%s\n", name.c_str());
    return kOk;
  } catch (const InvalidArgument &e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kUsage;
  } catch (const IoError &e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFailed;
  } catch (const std::exception &e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFailed;
  }
}
