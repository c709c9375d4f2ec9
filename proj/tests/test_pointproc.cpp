#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "pamlab/pointproc.hpp"

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

}  // namespace

TEST_CASE("intensity closed forms") {
  // d=1, alpha=2: q = 1, theta = 2; floor 2 -> theta y^{d-a} = 1
  CHECK(intensity_mass({IntensityModel::Kind::nu_pareto, 1, 2.0}, {2.0}) ==
        doctest::Approx(1.0).epsilon(1e-12));
  // d=1, gamma=1/2: q_lower = 2, theta = 2; full floor at 0 -> theta
  CHECK(intensity_mass({IntensityModel::Kind::nu_lower_weibull, 1, 0.5},
                       {0.0}) == doctest::Approx(2.0).epsilon(1e-12));
  // upper and lower weibull masses differ by (1-gamma)^{-d}
  for (int d : {1, 2}) {
    for (double g : {0.5, 0.75}) {
      const double up =
          intensity_mass({IntensityModel::Kind::nu_weibull, d, g}, {0.7});
      const double lo = intensity_mass(
          {IntensityModel::Kind::nu_lower_weibull, d, g}, {0.7});
      CHECK(up / lo == doctest::Approx(std::pow(1.0 - g, -d)).epsilon(1e-9));
    }
  }
  CHECK(intensity_mass({IntensityModel::Kind::mu_pareto, 1, 3.0}, {2.0}) ==
        doctest::Approx(0.125));
  CHECK(intensity_mass({IntensityModel::Kind::mu_weibull, 1, 0.5}, {4.0}) ==
        doctest::Approx(std::exp(-2.0)));

  CHECK_THROWS_AS(
      intensity_mass({IntensityModel::Kind::nu_pareto, 1, 2.0}, {0.0}),
      std::invalid_argument);
  CHECK_THROWS_AS(
      intensity_mass({IntensityModel::Kind::mu_pareto, 1, 2.0}, {-1.0}),
      std::invalid_argument);
}

TEST_CASE("quadrature oracle agrees with the closed forms") {
  const std::vector<std::pair<int, double>> pareto_grid = {
      {1, 2.0}, {1, 4.0}, {2, 4.0}, {2, 6.0}, {3, 5.0}};
  for (auto [d, a] : pareto_grid) {
    for (double tau : {0.5, 1.0, 2.0}) {
      const double closed =
          intensity_mass({IntensityModel::Kind::nu_pareto, d, a}, {tau});
      const double quad =
          quadrature_oracle({IntensityModel::Kind::nu_pareto, d, a}, {tau});
      CHECK(std::fabs(closed - quad) / closed <= 1e-6);
    }
  }
  for (auto [d, g] : std::vector<std::pair<int, double>>{
           {1, 0.5}, {2, 0.5}, {2, 0.75}}) {
    const double closed =
        intensity_mass({IntensityModel::Kind::nu_weibull, d, g}, {0.0});
    const double quad =
        quadrature_oracle({IntensityModel::Kind::nu_weibull, d, g}, {0.0});
    CHECK(std::fabs(closed - quad) / closed <= 1e-6);
  }
}

TEST_CASE("quadrature oracle region behavior") {
  const IntensityModel m{IntensityModel::Kind::nu_pareto, 1, 4.0};
  CHECK(quadrature_oracle(m, {1.0, 2.0, 2.0}) == 0.0);

  // additivity over disjoint windows
  const double whole = quadrature_oracle(m, {0.5, 0.0, 8.0});
  const double left = quadrature_oracle(m, {0.5, 0.0, 3.0});
  const double right = quadrature_oracle(m, {0.5, 3.0, 8.0});
  CHECK(whole == doctest::Approx(left + right).epsilon(1e-8));

  CHECK_THROWS_AS(quadrature_oracle(m, {-0.5, 0.0, 1.0}),
                  std::invalid_argument);
}

TEST_CASE("windowed closed form matches the oracle") {
  const IntensityModel m{IntensityModel::Kind::nu_pareto, 1, 4.0};
  const Region r{0.5, 0.3, 2.5};
  CHECK(intensity_mass(m, r) ==
        doctest::Approx(quadrature_oracle(m, r)).epsilon(1e-7));
  const IntensityModel w{IntensityModel::Kind::nu_weibull, 1, 0.5};
  CHECK(intensity_mass(w, r) ==
        doctest::Approx(quadrature_oracle(w, r)).epsilon(1e-7));
}

TEST_CASE("patterns respect the floor and match direct evaluation") {
  const auto spec = pareto_spec(4.0, 1, 17);
  TruncationPolicy policy;
  const double t = 1e4;
  const auto pat = build_pattern(spec, t, PatternKind::psi, 1.0, policy);
  const auto sc = scales(ScaleCase::pareto, 1, 4.0, t);
  RandomField f(spec);
  CHECK(pat.miss_probability <= policy.epsilon);
  for (const auto& p : pat.points) {
    CHECK(p.y >= 1.0);
    CHECK(p.y == doctest::Approx(psi(f, t, p.z) / sc.a_t).epsilon(1e-12));
    CHECK(p.x[0] == doctest::Approx(static_cast<double>(p.z.c[0]) / sc.r_t));
  }

  // an absurd floor leaves nothing
  const auto empty = build_pattern(spec, t, PatternKind::psi, 1e9, policy);
  CHECK(empty.points.empty());
}

TEST_CASE("pattern misses no site: brute window comparison") {
  const auto spec = pareto_spec(4.0, 1, 91);
  TruncationPolicy policy;
  const double t = 1e3;
  const double tau = 0.5;
  const auto sc = scales(ScaleCase::pareto, 1, 4.0, t);
  const double window = 3.0;
  const auto pat =
      build_pattern(spec, t, PatternKind::psi, tau, policy, window);
  RandomField f(spec);
  std::size_t count = 0;
  const auto r_max = static_cast<std::int64_t>(std::ceil(window * sc.r_t));
  for (std::int64_t r = 0; r <= r_max; ++r) {
    visit_shell(1, r, [&](const Site& z) {
      if (static_cast<double>(z.norm1) > window * sc.r_t) return;
      if (psi(f, t, z) / sc.a_t >= tau) ++count;
    });
  }
  CHECK(pat.points.size() == count);
}

TEST_CASE("mean pattern count tracks the intensity mass" *
          doctest::timeout(600)) {
  const auto spec0 = pareto_spec(4.0, 1, 0);
  TruncationPolicy policy;
  policy.epsilon = 1e-3;
  const double t = 1e5;
  for (double tau : {0.5, 1.0}) {
    const double mass =
        intensity_mass({IntensityModel::Kind::nu_pareto, 1, 4.0}, {tau});
    const int seeds = 200;
    double total = 0.0;
    for (int s = 0; s < seeds; ++s) {
      auto spec = spec0;
      spec.seed = 5000 + static_cast<std::uint64_t>(s);
      total += static_cast<double>(
          build_pattern(spec, t, PatternKind::psi, tau, policy).points.size());
    }
    const double mean = total / seeds;
    const double sigma = std::sqrt(mass / seeds);  // Poisson spread of a mean
    CHECK(std::fabs(mean - mass) <= 3.0 * sigma);
  }
}

TEST_CASE("pattern csv schema") {
  const auto spec = pareto_spec(4.0, 1, 17);
  TruncationPolicy policy;
  const auto pat = build_pattern(spec, 1e4, PatternKind::psi, 1.0, policy);
  std::ostringstream os;
  write_pattern_csv(os, pat);
  const std::string csv = os.str();
  CHECK(csv.rfind("x_1,y\n", 0) == 0);
}

TEST_CASE("poisson gof basics") {
  const std::vector<std::int64_t> zeros(6, 0);
  const std::vector<double> zero_e(6, 0.0);
  const auto res = poisson_gof(zeros, zero_e);
  CHECK(res.p == 1.0);

  CHECK_THROWS_AS(
      poisson_gof(std::vector<std::int64_t>{1, 0, 0, 0, 0},
                  std::vector<double>{0.0, 1.0, 1.0, 1.0, 1.0}),
      std::invalid_argument);
  CHECK_THROWS_AS(poisson_gof(std::vector<std::int64_t>{1, 2},
                              std::vector<double>{1.0, 2.0}),
                  std::invalid_argument);
}

TEST_CASE("poisson gof holds its level on simulated counts") {
  std::mt19937_64 rng(31);
  int passed = 0;
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<std::int64_t> counts(100);
    std::vector<double> expected(100, 3.0);
    std::poisson_distribution<std::int64_t> pois(3.0);
    for (auto& c : counts) c = pois(rng);
    if (poisson_gof(counts, expected).p > 0.01) ++passed;
  }
  CHECK(passed >= 97);
}

TEST_CASE("disjoint band counts are uncorrelated across seeds") {
  const double t = 1e4;
  TruncationPolicy policy;
  policy.epsilon = 1e-2;
  std::vector<double> a, b;
  for (int s = 0; s < 500; ++s) {
    const auto spec = pareto_spec(4.0, 1, 90000 + static_cast<std::uint64_t>(s));
    const auto pat = build_pattern(spec, t, PatternKind::psi, 0.5, policy, 8.0);
    double ca = 0.0, cb = 0.0;
    for (const auto& p : pat.points) {
      (p.x_norm < 1.0 ? ca : cb) += 1.0;
    }
    a.push_back(ca);
    b.push_back(cb);
  }
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= a.size();
  mb /= b.size();
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cov += (a[i] - ma) * (b[i] - mb);
    va += (a[i] - ma) * (a[i] - ma);
    vb += (b[i] - mb) * (b[i] - mb);
  }
  CHECK(std::fabs(cov / std::sqrt(va * vb)) < 0.1);
}

TEST_CASE("cell pooling reaches the expectation floor") {
  std::vector<std::int64_t> counts{1, 0, 2, 1, 5, 0};
  std::vector<double> expected{0.4, 0.3, 0.9, 1.5, 4.0, 0.2};
  pool_cells(counts, expected, 1.0);
  for (double e : expected) CHECK(e >= 1.0);
  std::int64_t total = 0;
  for (auto c : counts) total += c;
  CHECK(total == 9);
}
