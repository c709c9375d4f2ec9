#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <vector>

#include "pamlab/extremes.hpp"
#include "pamlab/field.hpp"
#include "pamlab/variational.hpp"

using namespace pamlab;

namespace {

FieldSpec pareto_spec(double alpha, int dim, std::uint64_t seed) {
  FieldSpec s;
  s.family = Family::pareto;
  s.alpha = alpha;
  s.dim = dim;
  s.seed = seed;
  return s;
}

double brute_psi_max(const PotentialField& f, double t, VarKind kind,
                     std::int64_t radius) {
  double best = -1e300;
  for (std::int64_t r = 0; r <= radius; ++r) {
    visit_shell(f.dim(), r, [&](const Site& z) {
      const double v = kind == VarKind::n ? psi(f, t, z) : psi_lower(f, t, z);
      best = std::max(best, v);
    });
  }
  return best;
}

}  // namespace

TEST_CASE("site functionals") {
  ExplicitField f(1, 0.0);
  f.set(Site::of({0}), 5.0);
  f.set(Site::of({3}), 9.0);

  CHECK(psi(f, 1.0, Site::of({0})) == 5.0);
  CHECK(psi_lower(f, 1.0, Site::of({0})) == 5.0);

  const double expected = 9.0 - 3.0 * std::log(3.0 / (2.0 * std::exp(1.0)));
  CHECK(psi(f, 1.0, Site::of({3})) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(psi(f, 1.0, Site::of({3})) == doctest::Approx(10.7836).epsilon(1e-4));

  CHECK(psi_lower(f, 1.0, Site::of({3})) ==
        doctest::Approx(9.0 - 3.0 * std::log(9.0)).epsilon(1e-12));
  CHECK(psi_lower(f, 1.0, Site::of({3})) ==
        doctest::Approx(2.4083).epsilon(1e-4));

  // potential at most 1: the log_+ penalty vanishes
  ExplicitField small(1, 0.0);
  small.set(Site::of({4}), 0.8);
  CHECK(psi_lower(small, 2.0, Site::of({4})) == 0.8);

  // |z| = 2det exactly: the entropy penalty vanishes
  const double t = 3.0 / (2.0 * std::exp(1.0));
  CHECK(psi(f, t, Site::of({3})) == doctest::Approx(9.0).epsilon(1e-12));

  // xi = e at |z| = t: penalty is exactly one
  ExplicitField g(1, 0.0);
  g.set(Site::of({2}), std::exp(1.0));
  CHECK(psi_lower(g, 2.0, Site::of({2})) ==
        doctest::Approx(std::exp(1.0) - 1.0).epsilon(1e-12));
}

TEST_CASE("tail certificate vanishes for huge running maxima") {
  const auto spec = pareto_spec(4.0, 1, 0);
  CHECK(tail_miss_prob(spec, 10.0, VarKind::n, 1e9, 200) < 1e-12);
  CHECK(tail_miss_prob(spec, 10.0, VarKind::n_lower, 1e9, 200) < 1e-12);
}

TEST_CASE("tail certificate never increases when the scan deepens") {
  const auto spec = pareto_spec(4.0, 1, 0);
  for (VarKind kind : {VarKind::n, VarKind::n_lower}) {
    double prev = 2.0;
    for (std::int64_t r = 200; r <= 12800; r *= 2) {
      const double m = tail_miss_prob(spec, 10.0, kind, 5.0, r);
      CHECK(m <= prev + 1e-15);
      prev = m;
    }
  }
  CHECK_THROWS_AS(tail_miss_prob(spec, 10.0, VarKind::n, 5.0, 10),
                  std::invalid_argument);
}

TEST_CASE("tail certificate upper-bounds a Monte Carlo miss estimate") {
  // fresh potential continuations beyond R = 200; certificate for kind n
  const auto spec = pareto_spec(4.0, 1, 0);
  const double t = 10.0;
  const double best = 5.0;
  const std::int64_t R = 200;
  const double bound = tail_miss_prob(spec, t, VarKind::n, best, R);

  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::int64_t hits = 0;
  const int reps = 10000;
  for (int rep = 0; rep < reps; ++rep) {
    bool hit = false;
    for (std::int64_t r = R + 1; r <= 4000 && !hit; ++r) {
      const double x_star =
          best + entropy_penalty(1, t, static_cast<double>(r));
      const double p_exceed = tail_prob(spec, x_star);
      // two sites per shell in d = 1
      if (uni(rng) < p_exceed || uni(rng) < p_exceed) hit = true;
    }
    if (hit) ++hits;
  }
  const double estimate = static_cast<double>(hits) / reps;
  CHECK(bound >= estimate);
  CHECK(bound < 1.0);
}

TEST_CASE("hand-built variational solve") {
  ExplicitField f(1, 0.0);
  f.set(Site::of({0}), 5.0);
  f.set(Site::of({3}), 9.0);
  TruncationPolicy policy;
  policy.epsilon = 1e-9;

  const auto up = solve_variational(f, 1.0, VarKind::n, policy);
  CHECK(up.value == doctest::Approx(10.7836).epsilon(1e-4));
  CHECK(up.argmax_site == Site::of({3}));
  CHECK(up.argmax_radius == 3);
  CHECK(up.miss_probability == 0.0);

  const auto lo = solve_variational(f, 1.0, VarKind::n_lower, policy);
  CHECK(lo.value == 5.0);
  CHECK(lo.argmax_site == Site::of({0}));
}

TEST_CASE("solve result dominates the origin value") {
  std::mt19937_64 rng(11);
  TruncationPolicy policy;
  for (int trial = 0; trial < 10; ++trial) {
    const auto spec = pareto_spec(4.0, 1 + static_cast<int>(rng() % 2), rng());
    RandomField f(spec);
    const double t = 1.0 + static_cast<double>(rng() % 50);
    for (VarKind kind : {VarKind::n, VarKind::n_lower}) {
      const auto res = solve_variational(f, t, kind, policy);
      CHECK(res.value >= site_value(spec, Site::origin(spec.dim)));
      CHECK(res.miss_probability <= policy.epsilon);
    }
  }
}

TEST_CASE("certified solve equals brute force over twice the radius") {
  const auto spec = pareto_spec(4.0, 1, 7);
  RandomField f(spec);
  TruncationPolicy policy;
  policy.epsilon = 1e-6;
  for (VarKind kind : {VarKind::n, VarKind::n_lower}) {
    const auto res = solve_variational(f, 100.0, kind, policy);
    const double brute = brute_psi_max(f, 100.0, kind, 2 * res.scanned_radius);
    CHECK(res.value == brute);
  }
}

TEST_CASE("solve value equals a rescan of the scanned ball") {
  const auto spec = pareto_spec(5.0, 2, 123);
  RandomField f(spec);
  TruncationPolicy policy;
  policy.epsilon = 1e-4;
  const auto res = solve_variational(f, 3.0, VarKind::n, policy);
  CHECK(res.value == brute_psi_max(f, 3.0, VarKind::n, res.scanned_radius));
}

TEST_CASE("trace results equal fresh per-t solves") {
  const auto spec = pareto_spec(4.0, 1, 55);
  RandomField f(spec);
  TruncationPolicy policy;
  const std::vector<double> grid{5.0, 10.0, 20.0, 40.0, 80.0};
  const auto joint = trace(f, VarKind::n, grid, policy);
  REQUIRE(joint.size() == grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto solo = solve_variational(f, grid[i], VarKind::n, policy);
    CHECK(joint[i].value == solo.value);
    CHECK(joint[i].scanned_radius == solo.scanned_radius);
    CHECK(joint[i].miss_probability == solo.miss_probability);
    CHECK(joint[i].argmax_site == solo.argmax_site);
  }
  CHECK_THROWS_AS(trace(f, VarKind::n, std::vector<double>{2.0, 2.0}, policy),
                  std::invalid_argument);
}

TEST_CASE("joint multi-target solve is thread-count independent") {
  const auto spec = pareto_spec(4.0, 2, 99);
  RandomField f(spec);
  TruncationPolicy serial;
  TruncationPolicy threaded;
  threaded.threads = 2;
  const std::vector<VarTarget> targets{{20.0, VarKind::n},
                                       {20.0, VarKind::n_lower},
                                       {60.0, VarKind::n}};
  const auto a = solve_many(f, targets, serial);
  const auto b = solve_many(f, targets, threaded);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    CHECK(a[i].value == b[i].value);
    CHECK(a[i].argmax_site == b[i].argmax_site);
    CHECK(a[i].scanned_radius == b[i].scanned_radius);
  }
}

TEST_CASE("upper functional dominates the bonus-region competitor") {
  TruncationPolicy policy;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto spec = pareto_spec(4.0, 1, 777 + seed);
    RandomField f(spec);
    for (double t : {2.0, 10.0, 40.0}) {
      const auto res = solve_variational(f, t, VarKind::n, policy);
      const double competitor = bonus_region_value(f, t);
      // evaluating psi at the bonus-ball argmax already gives M - 2d
      CHECK(res.value >=
            std::max(site_value(spec, Site::origin(1)), competitor - 4.0) -
                1e-12);
      CHECK(res.value >= competitor - 2.0 * spec.dim - 1e-12);
    }
  }
}

TEST_CASE("scan budget overrun carries the best-so-far result") {
  const auto spec = pareto_spec(4.0, 1, 3);
  RandomField f(spec);
  TruncationPolicy policy;
  policy.max_radius = 64;  // far below any certificate at t = 100
  try {
    solve_variational(f, 100.0, VarKind::n, policy);
    FAIL("expected BudgetExceeded");
  } catch (const BudgetExceeded& ex) {
    REQUIRE(ex.best_so_far.size() == 1);
    CHECK(ex.best_so_far[0].value >= site_value(spec, Site::origin(1)));
    CHECK(ex.best_so_far[0].miss_probability > 0.0);
  }
}

TEST_CASE("argmax radius and peak height scale as predicted" *
          doctest::timeout(600)) {
  // d=1, alpha=4, t=1e6: log r(t)/log t near alpha/(alpha-d) = 4/3 and
  // log M_{r(t)} / log(r(t)/t) near 1, across 20 seeds
  const double t = 1e6;
  TruncationPolicy policy;
  policy.epsilon = 1e-3;
  int radius_ok = 0;
  int height_ok = 0;
  const int seeds = 20;
  for (std::uint64_t seed = 0; seed < seeds; ++seed) {
    const auto spec = pareto_spec(4.0, 1, 40000 + seed);
    RandomField f(spec);
    const auto res = solve_variational(f, t, VarKind::n, policy);
    const double ratio =
        std::log(static_cast<double>(res.argmax_radius)) / std::log(t);
    if (ratio >= 4.0 / 3.0 - 0.1 && ratio <= 4.0 / 3.0 + 0.1) ++radius_ok;

    MaxSeries series(f);
    series.extend(res.argmax_radius);
    const double m = series.value_at(res.argmax_radius);
    const double h = std::log(m) /
                     std::log(static_cast<double>(res.argmax_radius) / t);
    if (h >= 0.85 && h <= 1.15) ++height_ok;
  }
  CHECK(radius_ok >= 18);  // >= 90% of seeds
  CHECK(height_ok >= 18);
}
