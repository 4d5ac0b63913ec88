#include "clab/contraction_harness.hpp"

#include <benchmark/benchmark.h>

using namespace clab;

namespace {

void BM_RusanovStep(benchmark::State& st) {
  auto sys = make_system(st.range(1) == 1 ? "burgers" : "isentropic_euler", 1.4, 1.0);
  const int n = static_cast<int>(st.range(0));
  Grid1D g = Grid1D::make(-2, 2, n);
  FieldSnapshot f = st.range(1) == 1 ? riemann_data(g, make_state({1.0}), make_state({0.0}), 0.0)
                                     : riemann_data(g, make_state({1.0, 1.3}), make_state({1.2, 1.1}), 0.0);
  for (auto _ : st) {
    FieldSnapshot next = step(*sys, f, SourceOperator::zero(), 0.4);
    benchmark::DoNotOptimize(next.cells.data());
  }
  st.SetItemsProcessed(st.iterations() * n);
}
BENCHMARK(BM_RusanovStep)->Args({400, 1})->Args({1600, 1})->Args({400, 2})->Args({1600, 2});

void BM_TraceLocus(benchmark::State& st) {
  auto sys = make_system(st.range(0) == 2 ? "isentropic_euler" : "full_euler", 1.4, 1.0);
  const Vec base = st.range(0) == 2 ? make_state({1.0, 1.3}) : make_state({1.0, 0.5, 2.625});
  std::vector<double> s(101);
  for (int i = 0; i <= 100; ++i) s[i] = i / 100.0;
  for (auto _ : st) benchmark::DoNotOptimize(trace_locus(*sys, base, Family::First, s).S.back());
}
BENCHMARK(BM_TraceLocus)->Arg(2)->Arg(3)->Unit(benchmark::kMillisecond);

void BM_IntegrateFilippov(benchmark::State& st) {
  auto b = make_system("burgers", 1.4, 1.0);
  Grid1D g = Grid1D::make(-2, 2, static_cast<int>(st.range(0)));
  FieldSnapshot f = riemann_data(g, make_state({1.0}), make_state({0.0}), 0.0);
  add_bump(f, make_state({1.0}), 0.01, 0.25, 0.2);
  auto traj = simulate(*b, f, SourceOperator::zero(), 0.4, 0.5);
  ReferenceSolution refs;
  for (const auto& s : traj) {
    refs.t.push_back(s.t);
    refs.left.push_back(make_state({1.0}));
    refs.right.push_back(make_state({0.0}));
  }
  ContractionWeights w;
  w.a = 5e-3;
  w.C_star = 1e6;
  for (auto _ : st) benchmark::DoNotOptimize(integrate_filippov(*b, traj, w, refs, 0.0).h.back());
}
BENCHMARK(BM_IntegrateFilippov)->Arg(400)->Arg(800)->Unit(benchmark::kMillisecond);

void BM_RunExperiment(benchmark::State& st) {
  auto b = make_system("burgers", 1.4, 1.0);
  ExperimentSpec spec;
  spec.grid = Grid1D::make(-2, 2, static_cast<int>(st.range(0)));
  spec.u_L = make_state({1.0});
  for (auto _ : st) benchmark::DoNotOptimize(run_experiment(*b, spec).E.back());
}
BENCHMARK(BM_RunExperiment)->Arg(400)->Unit(benchmark::kMillisecond)->Iterations(3);

}  // namespace
BENCHMARK_MAIN();
