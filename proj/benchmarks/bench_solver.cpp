#include <benchmark/benchmark.h>

#include "pamlab/field.hpp"
#include "pamlab/solver.hpp"

using namespace pamlab;

namespace {

void BM_solve_ode(benchmark::State& state) {
  FieldSpec spec;
  spec.family = Family::weibull;
  spec.gamma = 0.5;
  spec.dim = 1;
  spec.seed = 3;
  RandomField field(spec);
  const auto radius = state.range(0);
  for (auto _ : state) {
    auto res = solve_ode(field, 5.0, radius, 1e-6);
    benchmark::DoNotOptimize(res.log_mass);
  }
}
BENCHMARK(BM_solve_ode)->Arg(100)->Arg(400)->Unit(benchmark::kMillisecond);

void BM_dense_oracle(benchmark::State& state) {
  FieldSpec spec;
  spec.family = Family::pareto;
  spec.alpha = 4.0;
  spec.dim = 1;
  spec.seed = 3;
  RandomField field(spec);
  const auto radius = state.range(0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(dense_oracle(field, 2.0, radius));
  }
}
BENCHMARK(BM_dense_oracle)->Arg(50)->Arg(300)->Unit(benchmark::kMillisecond);

}  // namespace
