#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <vector>

#include "pamlab/field.hpp"
#include "pamlab/scan.hpp"

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

FieldSpec weibull_spec(double gamma, int dim, std::uint64_t seed) {
  FieldSpec s;
  s.family = Family::weibull;
  s.gamma = gamma;
  s.dim = dim;
  s.seed = seed;
  return s;
}

// independent count of |z|_1 <= r by brute box enumeration
std::int64_t brute_ball(int d, int r) {
  std::int64_t count = 0;
  std::vector<int> c(d, -r);
  for (;;) {
    int norm = 0;
    for (int v : c) norm += std::abs(v);
    if (norm <= r) ++count;
    int axis = d - 1;
    while (axis >= 0 && c[axis] == r) c[axis--] = -r;
    if (axis < 0) break;
    ++c[axis];
  }
  return count;
}

double ks_uniform(std::vector<double> u) {
  std::sort(u.begin(), u.end());
  const double n = static_cast<double>(u.size());
  double d = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    d = std::max(d, std::max(u[i] - i / n, (i + 1) / n - u[i]));
  }
  return d;
}

}  // namespace

TEST_CASE("inverse_cdf closed forms") {
  CHECK(inverse_cdf(pareto_spec(2.0, 1, 0), 0.75) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(inverse_cdf(pareto_spec(7.5, 1, 0), 0.0) == doctest::Approx(1.0));
  CHECK(inverse_cdf(weibull_spec(0.5, 1, 0), 1.0 - std::exp(-2.0)) ==
        doctest::Approx(4.0).epsilon(1e-12));
  FieldSpec e;
  e.family = Family::exponential;
  e.dim = 1;
  CHECK(inverse_cdf(e, 1.0 - std::exp(-3.0)) == doctest::Approx(3.0));

  CHECK_THROWS_AS(inverse_cdf(pareto_spec(2.0, 1, 0), 1.0), std::domain_error);
  CHECK_THROWS_AS(inverse_cdf(pareto_spec(2.0, 1, 0), -0.1), std::domain_error);
}

TEST_CASE("inverse_cdf round trip and monotonicity") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (const auto& spec :
       {pareto_spec(3.0, 2, 1), weibull_spec(0.7, 1, 2), weibull_spec(1.0, 1, 3)}) {
    double prev_u = -1.0, prev_x = -1.0;
    for (int i = 0; i < 2000; ++i) {
      const double u = uni(rng);
      const double x = inverse_cdf(spec, u);
      CHECK(tail_prob(spec, x) == doctest::Approx(1.0 - u).epsilon(1e-12));
      if (u > prev_u && prev_u >= 0.0) CHECK(x > prev_x);
      if (u > prev_u) {
        prev_u = u;
        prev_x = x;
      }
    }
  }
}

TEST_CASE("tail values") {
  CHECK(tail_prob(pareto_spec(3.0, 1, 0), 2.0) == doctest::Approx(0.125).epsilon(1e-14));
  CHECK(tail_prob(pareto_spec(5.5, 1, 0), 0.3) == 1.0);
  CHECK(tail_prob(pareto_spec(5.5, 1, 0), 1.0) == 1.0);
  CHECK(tail_prob(weibull_spec(1.0, 1, 0), 1.0) ==
        doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
  CHECK(tail_prob(weibull_spec(0.5, 1, 0), -2.0) == 1.0);
}

TEST_CASE("spec validation") {
  CHECK_THROWS_AS(pareto_spec(2.0, 2, 0).validate(), std::invalid_argument);
  CHECK_THROWS_AS(weibull_spec(1.5, 1, 0).validate(), std::invalid_argument);
  CHECK_THROWS_AS(weibull_spec(0.0, 1, 0).validate(), std::invalid_argument);
  CHECK_NOTHROW(weibull_spec(1.0, 3, 0).validate());
}

TEST_CASE("site_value determinism and order independence") {
  const auto spec = pareto_spec(4.0, 3, 99);
  const Site z = Site::of({3, -2, 5});
  const double v1 = site_value(spec, z);
  const double v2 = site_value(spec, z);
  CHECK(v1 == v2);

  // evaluating other sites in between changes nothing
  for (std::int64_t i = 0; i < 100; ++i) {
    (void)site_value(spec, Site::of({i, i, -i}));
  }
  CHECK(site_value(spec, z) == v1);
}

TEST_CASE("field snapshot identical across scan thread counts") {
  const auto spec = pareto_spec(4.0, 2, 5);
  auto one = scan::collect_exceedances(spec, 0, 200, 0, 1);
  auto two = scan::collect_exceedances(spec, 0, 200, 0, 2);
  REQUIRE(one.size() == two.size());
  for (std::size_t i = 0; i < one.size(); ++i) {
    CHECK(one[i].bits == two[i].bits);
    CHECK(one[i].z == two[i].z);
  }
}

TEST_CASE("empirical distribution passes KS at the 1% level") {
  // 1e6 sites against each family; critical value 1.63/sqrt(n) ~ 0.00163
  for (const auto& spec :
       {pareto_spec(4.0, 1, 11), weibull_spec(0.5, 1, 12), [] {
          FieldSpec s;
          s.family = Family::exponential;
          s.dim = 1;
          s.seed = 13;
          return s;
        }()}) {
    std::vector<double> u;
    u.reserve(1000001);
    Site z = Site::origin(1);
    for (std::int64_t i = -500000; i <= 500000; ++i) {
      z.c[0] = i;
      z.norm1 = std::abs(i);
      u.push_back(field_cdf(spec, site_value(spec, z)));
    }
    CHECK(ks_uniform(std::move(u)) < 0.002);
  }
}

TEST_CASE("tail indicator matches within a 4 sigma binomial band") {
  const auto spec = pareto_spec(4.0, 1, 21);
  const double x = 1.8;
  const double p = tail_prob(spec, x);
  const std::int64_t n = 1000000;
  std::int64_t hits = 0;
  Site z = Site::origin(1);
  for (std::int64_t i = -n / 2; i < n / 2; ++i) {
    z.c[0] = i;
    z.norm1 = std::abs(i);
    if (site_value(spec, z) > x) ++hits;
  }
  const double sigma = std::sqrt(p * (1.0 - p) * n);
  CHECK(std::fabs(hits - p * n) < 4.0 * sigma);
}

TEST_CASE("ball_size closed form") {
  CHECK(ball_size(1, 3) == 7);
  CHECK(ball_size(2, 2) == 13);
  CHECK(ball_size(3, 2) == 25);
  CHECK(ball_size(2, 0) == 1);
  for (int d = 1; d <= 4; ++d) {
    for (int r = 0; r <= 15; ++r) {
      CHECK(ball_size(d, r) == static_cast<std::uint64_t>(brute_ball(d, r)));
    }
  }
  CHECK_THROWS_AS(ball_size(8, 1000000000), std::overflow_error);
}

TEST_CASE("shell enumeration: lexicographic, complete, duplicate-free") {
  CHECK(shell_sites(2, 0).size() == 1);
  CHECK(shell_sites(2, 0)[0] == Site::of({0, 0}));
  CHECK(shell_sites(2, 1).size() == 4);

  std::uint64_t total = 0;
  for (int r = 0; r <= 5; ++r) total += shell_sites(3, r).size();
  CHECK(total == ball_size(3, 5));

  for (int d = 1; d <= 4; ++d) {
    const auto sites = shell_sites(d, 6);
    CHECK(sites.size() == shell_size(d, 6));
    std::set<std::vector<std::int64_t>> seen;
    for (const auto& z : sites) {
      CHECK(z.norm1 == 6);
      std::int64_t norm = 0;
      for (auto c : z.coords()) norm += std::llabs(c);
      CHECK(norm == 6);
      seen.insert({z.coords().begin(), z.coords().end()});
    }
    CHECK(seen.size() == sites.size());
    const bool lex = std::is_sorted(
        sites.begin(), sites.end(), [](const Site& a, const Site& b) {
          return std::lexicographical_compare(a.c.begin(), a.c.begin() + a.dim,
                                              b.c.begin(), b.c.begin() + b.dim);
        });
    CHECK(lex);
  }
}

TEST_CASE("shell counts stay below the certificate coefficient") {
  // shell(d, r) <= 2^d d r^{d-1}: the certificate closure leans on this.
  for (int d = 1; d <= 8; ++d) {
    const double coeff = std::ldexp(static_cast<double>(d), d);
    for (int r = 1; r <= 300; ++r) {
      CHECK(static_cast<double>(shell_size(d, r)) <=
            coeff * std::pow(static_cast<double>(r), d - 1) * (1 + 1e-12));
    }
  }
}

TEST_CASE("ball_size_bound dominates the exact count") {
  for (int d = 1; d <= 5; ++d) {
    for (int r : {0, 1, 2, 7, 40, 200}) {
      CHECK(ball_size_bound(d, r) >= static_cast<double>(ball_size(d, r)));
    }
  }
}

TEST_CASE("coordinate encoding is injective and range-checked") {
  std::set<std::uint64_t> seen;
  for (std::int64_t a = -9; a <= 9; ++a) {
    for (std::int64_t b = -9; b <= 9; ++b) {
      const Site z = Site::of({a, b});
      seen.insert(encode_site(z.coords()));
    }
  }
  CHECK(seen.size() == 19u * 19u);

  const std::int64_t lim = max_coord(4);
  CHECK_NOTHROW(encode_site(Site::of({lim, 0, 0, 0}).coords()));
  CHECK_THROWS_AS(encode_site(Site::of({lim + 1, 0, 0, 0}).coords()),
                  std::domain_error);
}

TEST_CASE("site ordering: norm first, then lexicographic") {
  CHECK(site_less(Site::of({0, 1}), Site::of({2, 1})));
  CHECK(site_less(Site::of({-1, 0}), Site::of({0, 1})));
  CHECK(!site_less(Site::of({0, 1}), Site::of({-1, 0})));
}

TEST_CASE("explicit field stores values over a fill") {
  ExplicitField f(1, 0.5);
  f.set(Site::of({3}), 9.0);
  f.set(Site::of({-1}), 1.2);
  CHECK(f.value(Site::of({3})) == 9.0);
  CHECK(f.value(Site::of({7})) == 0.5);
  CHECK(f.support_radius() == 3);
  CHECK(f.exceed_prob(0.5) == 0.0);
  CHECK(f.exceed_prob(0.4) == 1.0);
}
