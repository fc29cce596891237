#include <benchmark/benchmark.h>

#include <cmath>
#include <memory>

#include "kpzss/asymptotics.hpp"
#include "kpzss/blowup.hpp"
#include "kpzss/ode.hpp"
#include "kpzss/pde.hpp"
#include "kpzss/profile.hpp"

using namespace kpzss;

namespace {

ModelParams unit_params() { return ModelParams{1.0, 3.0, 1.0}; }

void BM_DormandPrinceOscillator(benchmark::State& state) {
  ode::IvpSpec s;
  s.dimension = 2;
  s.t_end = 100.0;
  s.y_start = {0.0, 1.0};
  s.rhs = [](double, std::span<const double> y, std::span<double> d) {
    d[0] = y[1];
    d[1] = -y[0];
  };
  for (auto _ : state) benchmark::DoNotOptimize(ode::integrate(s, ode::Tolerances{}).size());
}
BENCHMARK(BM_DormandPrinceOscillator);

void BM_SolveProfile(benchmark::State& state) {
  const double xi_max = std::pow(10.0, static_cast<double>(state.range(0)));
  for (auto _ : state)
    benchmark::DoNotOptimize(solve_profile(unit_params(), -1.0, xi_max).xi_max_reached);
}
BENCHMARK(BM_SolveProfile)->Arg(2)->Arg(4)->Arg(6)->Unit(benchmark::kMillisecond);

void BM_DetectBlowup(benchmark::State& state) {
  for (auto _ : state)
    benchmark::DoNotOptimize(detect_blowup(unit_params(), 1.0).xi_star_bracket.hi);
}
BENCHMARK(BM_DetectBlowup)->Unit(benchmark::kMicrosecond);

void BM_RatioLimit(benchmark::State& state) {
  const auto sol = solve_profile(unit_params(), -1.0);
  const auto c = constants(unit_params());
  for (auto _ : state) benchmark::DoNotOptimize(estimate_ratio_limit(sol, c).rel_error);
}
BENCHMARK(BM_RatioLimit)->Unit(benchmark::kMicrosecond);

void BM_SemidiscreteRhs(benchmark::State& state) {
  const auto p = unit_params();
  const auto prof = std::make_shared<const ProfileSolution>(solve_profile(p, -1.0, 100.0));
  const SelfSimilarField exact(p, prof);
  auto field = make_grid(8.0, static_cast<std::size_t>(state.range(0)));
  set_exact(field, exact);
  for (auto _ : state) benchmark::DoNotOptimize(semidiscrete_rhs(field, p, exact).data());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SemidiscreteRhs)->Arg(1025)->Arg(2049);

void BM_PdeEvolve(benchmark::State& state) {
  const auto p = unit_params();
  const auto prof = std::make_shared<const ProfileSolution>(solve_profile(p, -1.0, 100.0));
  for (auto _ : state)
    benchmark::DoNotOptimize(evolve_and_compare(p, prof, 8.0, 257, 0.5).max_rel_err);
}
BENCHMARK(BM_PdeEvolve)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
