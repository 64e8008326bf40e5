// One PASS/FAIL line per acceptance criterion. Exit status is nonzero when a
// criterion fails unless it was named with --expect-fail, which is reported
// as "FAIL (expected)" and still printed.
#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "layered_ocp/bench/experiments.hpp"
#include "layered_ocp/verify/suite.hpp"

namespace {

using namespace layered_ocp;
using Clock = std::chrono::steady_clock;

struct Verdict {
  bool passed = false;
  std::string detail;
};

struct Criterion {
  std::string name;
  double budget_seconds;
  std::function<Verdict()> run;
};

std::string fmt(const char *f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

Verdict from_check(const verify::CheckResult &c) { return {c.passed, c.detail}; }

bench::ExperimentReport run(const std::string &name, std::uint64_t seed = 7) {
  bench::ExperimentConfig cfg;
  cfg.experiment = name;
  cfg.trials = 20;
  cfg.seed = seed;
  return bench::run_experiment(cfg);
}

const bench::Check *find_check(const bench::ExperimentReport &r, const std::string &name) {
  for (const auto &c : r.checks)
    if (c.name == name) return &c;
  return nullptr;
}

bool check_ok(const bench::ExperimentReport &r, const std::string &name, std::string &detail) {
  const auto *c = find_check(r, name);
  if (!c) {
    detail += " [" + name + " missing]";
    return false;
  }
  if (!c->passed) detail += " [" + name + ": " + c->detail + "]";
  return c->passed;
}

double trailing_slope(const std::vector<double> &y, std::size_t k) {
  const std::size_t n = std::min(k, y.size());
  const std::size_t off = y.size() - n;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += double(i);
    sy += y[off + i];
    sxx += double(i * i);
    sxy += double(i) * y[off + i];
  }
  const double d = double(n) * sxx - sx * sx;
  return d == 0.0 ? 0.0 : (double(n) * sxy - sx * sy) / d;
}

Verdict cartpole() {
  const auto r = run("cartpole");
  const double a = r.admm.success_rate, b = r.baseline_aggregate.success_rate;
  const bool ok = a >= 80.0 && a >= b + 30.0 &&
                  r.admm.iterations_mean > r.baseline_aggregate.iterations_mean;
  return {ok, "admm " + fmt("%.0f%%", a) + " (" + fmt("%.1f", r.admm.iterations_mean) + " +- " +
                  fmt("%.1f", r.admm.iterations_std) + " iterations) vs ilqr " +
                  fmt("%.0f%%", b) + " (" + fmt("%.1f", r.baseline_aggregate.iterations_mean) +
                  "); need admm >= 80% and >= ilqr + 30"};
}

Verdict unicycle() {
  bool ok = true;
  std::string detail;
  for (const std::string name :
       {"unicycle", "unicycle-corridor", "unicycle-low-order", "unicycle-low-order-corridor-vel"}) {
    const auto r = run(name);
    ok = ok && r.admm.success_rate >= 90.0;
    ok = check_ok(r, "trajectories-feasible", detail) && ok;
    if (name.find("corridor") != std::string::npos) ok = check_ok(r, "reference-constraints", detail) && ok;
    if (name.find("vel") != std::string::npos) ok = check_ok(r, "action-bounds", detail) && ok;
    detail += name + " admm " + fmt("%.0f%%", r.admm.success_rate) + " ilqr " +
              fmt("%.0f%%", r.baseline_aggregate.success_rate) + "; ";
  }
  return {ok, detail};
}

Verdict obstacle() {
  const auto r = run("unicycle-obstacle");
  std::string detail = "admm " + fmt("%.0f%%", r.admm.success_rate) + ";";
  bool ok = check_ok(r, "reference-constraints", detail);
  const auto grid = verify::check_obstacle_prox(100, 4242);
  ok = ok && grid.passed;
  return {ok, detail + " grid oracle: " + grid.detail};
}

Verdict quadrotor() {
  const auto r = run("quadrotor");
  std::string detail = "admm " + fmt("%.0f%%", r.admm.success_rate) + " ilqr " +
                       fmt("%.0f%%", r.baseline_aggregate.success_rate) + ";";
  bool ok = r.admm.success_rate >= 80.0;
  ok = check_ok(r, "trajectories-feasible", detail) && ok;
  int rising = 0;
  std::string which;
  for (std::size_t i = 0; i < r.trials.size(); ++i) {
    const auto &a = r.trials[i].admm;
    if (trailing_slope(a.primal, 5) > 0.0 || trailing_slope(a.dual, 5) > 0.0) {
      ++rising;
      which += " " + std::to_string(i);
    }
  }
  ok = ok && rising == 0;
  return {ok, detail + " residual trace rising over the last 5 iterations in " +
                  std::to_string(rising) + "/20 trials" + (which.empty() ? "" : " (trial" + which + ")")};
}

}  // namespace

int main(int argc, char **argv) {
  std::set<std::string> expected;
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::strcmp(argv[i], "--expect-fail") == 0) expected.insert(argv[++i]);
  }

  const std::vector<Criterion> criteria = {
      {"linear-exactness", 5, [] { return from_check(verify::check_linear_exactness()); }},
      {"tracking-lqr-oracle", 30, [] { return from_check(verify::check_tracking_oracle(50, 42)); }},
      {"decomposition-identity", 60, [] { return from_check(verify::check_decomposition(50, 100, 43)); }},
      {"convex-convergence", 60, [] { return from_check(verify::check_convex_convergence(10, 44)); }},
      {"certainty-equivalence", 60, [] { return from_check(verify::check_certainty_equivalence(10000, 45)); }},
      {"cartpole-comparison", 600, cartpole},
      {"unicycle-suite", 600, unicycle},
      {"obstacle-avoidance", 120, obstacle},
      {"quadrotor", 900, quadrotor},
      {"rho-consistency", 60, [] { return from_check(verify::check_rho_consistency()); }},
  };

  int unexpected = 0;
  for (const auto &c : criteria) {
    const auto start = Clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception &e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - start).count();
    if (secs > c.budget_seconds) {
      v.passed = false;
      v.detail += " (over the " + fmt("%.0f", c.budget_seconds) + " s budget)";
    }
    const bool is_expected = expected.count(c.name) > 0;
    const char *tag = v.passed ? "PASS" : (is_expected ? "FAIL (expected)" : "FAIL");
    if (!v.passed && !is_expected) ++unexpected;
    std::printf("%s  %-24s %8.2fs  %s\n", tag, c.name.c_str(), secs, v.detail.c_str());
    std::fflush(stdout);
  }
  return unexpected == 0 ? 0 : 1;
}
