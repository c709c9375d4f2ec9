#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "pamlab/field.hpp"
#include "pamlab/solver.hpp"

using namespace pamlab;

namespace {

FieldSpec make_spec(Family fam, double shape, int dim, std::uint64_t seed) {
  FieldSpec s;
  s.family = fam;
  if (fam == Family::pareto) {
    s.alpha = shape;
  } else {
    s.gamma = shape;
  }
  s.dim = dim;
  s.seed = seed;
  return s;
}

// Continuous-time walk with rate 2d, killed at the box boundary: estimates
// the survival probability, the zero-potential mass.
double mc_stay_probability(int dim, std::int64_t radius, double t,
                           std::int64_t paths, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> hold(2.0 * dim);
  std::uniform_int_distribution<int> dir(0, 2 * dim - 1);
  std::int64_t alive = 0;
  std::vector<std::int64_t> z(dim);
  for (std::int64_t p = 0; p < paths; ++p) {
    std::fill(z.begin(), z.end(), 0);
    double clock = 0.0;
    bool ok = true;
    for (;;) {
      clock += hold(rng);
      if (clock >= t) break;
      const int move = dir(rng);
      z[move / 2] += (move % 2 == 0) ? 1 : -1;
      if (std::abs(z[move / 2]) > radius) {
        ok = false;
        break;
      }
    }
    if (ok) ++alive;
  }
  return static_cast<double>(alive) / static_cast<double>(paths);
}

}  // namespace

TEST_CASE("zero potential conserves the log mass") {
  ExplicitField f(1, 0.0);
  const auto res = solve_ode(f, 1.0, 50, 1e-10);
  CHECK(std::fabs(res.L) < 1e-8);
  CHECK(!res.leak_flag);
}

TEST_CASE("constant potential shifts the rate exactly") {
  ExplicitField f(1, 2.5);
  const auto res = solve_ode(f, 1.0, 40, 1e-10);
  CHECK(res.L == doctest::Approx(2.5).epsilon(1e-8));
}

TEST_CASE("five-site single-peak box matches the dense reference") {
  ExplicitField f(1, 0.0);
  f.set(Site::of({0}), 3.0);
  const double dense = dense_oracle(f, 1.0, 2);
  const auto ode = solve_ode(f, 1.0, 2, 1e-10);
  CHECK(ode.log_mass == doctest::Approx(dense).epsilon(1e-9));
  CHECK(std::fabs(ode.log_mass - dense) < 1e-8);
}

TEST_CASE("dense reference closed cases") {
  ExplicitField f(2, 0.0);
  f.set(Site::of({0, 0}), 4.0);
  // single site: generator is the scalar xi(0) - 2d
  CHECK(dense_oracle(f, 1.5, 0) == doctest::Approx(1.5 * (4.0 - 4.0)));
  ExplicitField g(1, 0.0);
  g.set(Site::of({0}), 4.0);
  CHECK(dense_oracle(g, 2.0, 0) == doctest::Approx(2.0 * (4.0 - 2.0)));
  // t = 0: unit mass
  CHECK(dense_oracle(g, 0.0, 3) == doctest::Approx(0.0));
  CHECK_THROWS_AS(dense_oracle(g, 1.0, 3000), std::invalid_argument);
}

TEST_CASE("dense reference matches a path-sampling estimate") {
  ExplicitField f(1, 0.0);
  const double exact = std::exp(dense_oracle(f, 1.0, 1));
  const std::int64_t paths = 1000000;
  const double est = mc_stay_probability(1, 1, 1.0, paths, 77);
  const double sigma = std::sqrt(exact * (1.0 - exact) / paths);
  CHECK(std::fabs(est - exact) < 3.0 * sigma);
}

TEST_CASE("stay-put strategy is exact on a single-site field") {
  ExplicitField f(1, 0.0);
  f.set(Site::of({0}), 7.0);
  const auto fk = fk_lower(f, 3.0, 5);
  CHECK(fk.lower_log == doctest::Approx(3.0 * (7.0 - 2.0)).epsilon(1e-12));
  CHECK(fk.lower_witness == Site::of({0}));
}

TEST_CASE("jump-count bound collapses on a flat field") {
  ExplicitField f(1, 0.0);
  f.set(Site::of({0}), 3.0);
  // the max over every ball is 3, so the series sums to e^{3t}
  // ... except f is 3 only at the origin; use a genuinely flat field:
  ExplicitField flat(1, 3.0);
  const auto fk = fk_upper(flat, 2.0, 1e-6);
  CHECK(fk.upper_log == doctest::Approx(6.0).epsilon(1e-6));
}

TEST_CASE("fk bounds sandwich the dense mass on random boxes") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const int dim = 1 + static_cast<int>(rng() % 2);
    const auto spec = make_spec(trial % 2 ? Family::pareto : Family::weibull,
                                trial % 2 ? 4.0 : 0.5, dim, rng());
    RandomField f(spec);
    const double t = 0.5 + 0.002 * static_cast<double>(rng() % 2000);
    const std::int64_t radius = dim == 1 ? 10 + rng() % 100 : 3 + rng() % 18;
    const double dense = dense_oracle(f, t, radius);
    const auto lo = fk_lower(f, t, radius);
    const auto hi = fk_upper(f, t, 1e-6);
    CHECK(lo.lower_log <= dense + 1e-9);
    CHECK(dense <= hi.upper_log + 1e-9);
    CHECK(lo.lower_log <= hi.upper_log + 1e-9);
  }
}

TEST_CASE("wider witness searches only improve the lower bound") {
  const auto spec = make_spec(Family::pareto, 4.0, 1, 5);
  RandomField f(spec);
  double prev = -1e300;
  for (std::int64_t radius : {2, 8, 32, 128}) {
    const double b = fk_lower(f, 5.0, radius).lower_log;
    CHECK(b >= prev);
    prev = b;
  }
}

TEST_CASE("box doubling only adds mass, with shrinking increments") {
  const auto spec = make_spec(Family::weibull, 0.5, 1, 31);
  RandomField f(spec);
  const double t = 4.0;
  double prev_l = -1e300;
  double prev_gap = 1e300;
  for (std::int64_t radius : {25, 50, 100, 200}) {
    const auto res = solve_ode(f, t, radius, 1e-10);
    CHECK(prev_l <= res.L + 1e-9);
    if (prev_l > -1e299) {
      const double gap = std::fabs(res.L - prev_l);
      CHECK(gap <= prev_gap + 1e-12);
      prev_gap = gap;
    }
    prev_l = res.L;
  }
}

TEST_CASE("splitting error shrinks at second order under step halving") {
  const auto spec = make_spec(Family::pareto, 4.0, 1, 8);
  RandomField f(spec);
  const double t = 2.0;
  const std::int64_t radius = 30;
  const double ref = dense_oracle(f, t, radius);
  double prev_err = 0.0;
  for (std::int64_t steps : {64, 128, 256, 512}) {
    const double err =
        std::fabs(solve_ode_fixed(f, t, radius, steps).log_mass - ref);
    if (prev_err > 0.0) {
      // second-order scheme: halving the step cuts the error by about 4
      CHECK(err < prev_err * 0.7);
    }
    prev_err = err;
  }
  // the halving criterion bounds the reported error as well
  const auto adaptive = solve_ode(f, t, radius, 1e-9);
  CHECK(std::fabs(adaptive.log_mass - ref) < 4e-9);
}
