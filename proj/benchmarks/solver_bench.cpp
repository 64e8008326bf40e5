#include <random>

#include <benchmark/benchmark.h>

#include "layered_ocp/ilqr.hpp"
#include "layered_ocp/layered_admm.hpp"
#include "layered_ocp/tracking_lqr.hpp"
#include "layered_ocp/verify/suite.hpp"

namespace {

using namespace layered_ocp;

TrackingProblem problem(Eigen::Index n, std::size_t N) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  auto rnd = [&](Eigen::Index r, Eigen::Index c) {
    return Matrix::NullaryExpr(r, c, [&] { return g(rng); }).eval();
  };
  TrackingProblem p;
  p.A = {Matrix::Identity(n, n) + 0.1 * rnd(n, n)};
  p.B = {rnd(n, 2)};
  p.R = {0.1 * Matrix::Identity(2, 2)};
  for (std::size_t t = 0; t <= N; ++t) {
    p.reference.push_back(rnd(n, 1));
    p.dual.push_back(rnd(n, 1));
  }
  p.rho = 2.0;
  p.initial_state = rnd(n, 1);
  return p;
}

// augmented Riccati solve, state dim x horizon
void BM_SolveTracking(benchmark::State &state) {
  const auto p = problem(state.range(0), std::size_t(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(solve_tracking(p));
}
BENCHMARK(BM_SolveTracking)->Args({2, 20})->Args({4, 20})->Args({4, 40})->Unit(benchmark::kMillisecond);

void BM_SolveTrackingCached(benchmark::State &state) {
  const auto p = problem(state.range(0), std::size_t(state.range(1)));
  const auto gains = riccati_gains(build_augmented(p), effective_input_weights(p));
  for (auto _ : state) benchmark::DoNotOptimize(solve_tracking(p, &gains));
}
BENCHMARK(BM_SolveTrackingCached)->Args({4, 40})->Unit(benchmark::kMillisecond);

void BM_IlqrCartpole(benchmark::State &state) {
  const auto model = make_cartpole();
  Vector goal(4);
  goal << 0, M_PI, 0, 0;
  const std::size_t N = 40;
  const auto cost = QuadraticCost::goal(Matrix::Identity(4, 4), goal, 0.1 * Matrix::Identity(4, 4),
                                        1000 * Matrix::Identity(4, 4),
                                        0.01 * Matrix::Identity(1, 1), N);
  Vector x0 = goal;
  x0[1] += 0.1;
  IlqrOptions opt;
  opt.max_iters = int(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(ilqr_solve(model, cost, x0, VectorSeq(N, Vector::Zero(1)), opt));
  }
}
BENCHMARK(BM_IlqrCartpole)->Arg(10)->Arg(50)->Unit(benchmark::kMillisecond);

void BM_AdmmCircle(benchmark::State &state) {
  const auto p = verify::circle_problem();
  AdmmConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(admm_solve(p, cfg));
}
BENCHMARK(BM_AdmmCircle)->Unit(benchmark::kMillisecond);

void BM_AdmmUnicycle(benchmark::State &state) {
  const std::size_t N = 20;
  Matrix C = Matrix::Zero(2, 3);
  C.leftCols(2).setIdentity();
  Vector goal(2);
  goal << 3, 2;
  LayeredProblem p{make_unicycle(),
                   ReferenceCost::goal(0.1 * Matrix::Identity(2, 2),
                                       1000 * Matrix::Identity(2, 2), goal, N),
                   {0.01 * Matrix::Identity(2, 2)},
                   ConstraintSpec::unconstrained(N),
                   std::nullopt,
                   N,
                   Vector::Zero(3),
                   C,
                   std::nullopt};
  AdmmConfig cfg;
  cfg.rho0 = 25.0;
  for (auto _ : state) benchmark::DoNotOptimize(admm_solve(p, cfg));
}
BENCHMARK(BM_AdmmUnicycle)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
