#include <benchmark/benchmark.h>

#include "pamlab/field.hpp"
#include "pamlab/variational.hpp"

using namespace pamlab;

namespace {

void BM_solve_variational(benchmark::State& state) {
  FieldSpec spec;
  spec.family = Family::pareto;
  spec.alpha = 4.0;
  spec.dim = 1;
  spec.seed = 7;
  RandomField field(spec);
  TruncationPolicy policy;
  policy.epsilon = 1e-6;
  const double t = static_cast<double>(state.range(0));
  for (auto _ : state) {
    auto res = solve_variational(field, t, VarKind::n, policy);
    benchmark::DoNotOptimize(res.value);
    spec.seed += 1;
    field = RandomField(spec);
  }
}
BENCHMARK(BM_solve_variational)->Arg(100)->Arg(10000);

void BM_tail_certificate(benchmark::State& state) {
  FieldSpec spec;
  spec.family = Family::weibull;
  spec.gamma = 0.5;
  spec.dim = 1;
  spec.seed = 7;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        tail_miss_prob(spec, 1e4, VarKind::n_lower, 120.0, 200000));
  }
}
BENCHMARK(BM_tail_certificate);

}  // namespace
