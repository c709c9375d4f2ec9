#include <benchmark/benchmark.h>

#include "pamlab/field.hpp"
#include "pamlab/scan.hpp"

using namespace pamlab;

namespace {

FieldSpec spec_d(int dim) {
  FieldSpec s;
  s.family = Family::pareto;
  s.alpha = 4.0;
  s.dim = dim;
  s.seed = 42;
  return s;
}

void BM_site_hash(benchmark::State& state) {
  std::uint64_t h = 0;
  std::uint64_t n = 0;
  for (auto _ : state) {
    h ^= detail::site_hash(42, n++);
  }
  benchmark::DoNotOptimize(h);
}
BENCHMARK(BM_site_hash);

void BM_site_value(benchmark::State& state) {
  const auto spec = spec_d(2);
  Site z = Site::origin(2);
  double acc = 0.0;
  std::int64_t i = 0;
  for (auto _ : state) {
    z.c[0] = i++;
    z.c[1] = -i;
    acc += site_value(spec, z);
  }
  benchmark::DoNotOptimize(acc);
}
BENCHMARK(BM_site_value);

// Throughput of the threshold scan, reported as sites/second.
void BM_shell_scan(benchmark::State& state) {
  const auto spec = spec_d(static_cast<int>(state.range(0)));
  const std::int64_t r0 = 1000;
  std::int64_t sites = 0;
  for (auto _ : state) {
    std::int64_t hits = 0;
    std::int64_t r1 = r0 + (spec.dim == 1 ? 2000000 : 2000);
    scan::for_each_exceedance(
        spec, r0, r1, (std::uint64_t{1} << 53) - (std::uint64_t{1} << 20),
        [&](const Site&, std::uint64_t) { ++hits; });
    benchmark::DoNotOptimize(hits);
    sites += static_cast<std::int64_t>(ball_size(spec.dim, r1 - 1) -
                                       ball_size(spec.dim, r0 - 1));
  }
  state.SetItemsProcessed(sites);
}
BENCHMARK(BM_shell_scan)->Arg(1)->Arg(2);

}  // namespace
