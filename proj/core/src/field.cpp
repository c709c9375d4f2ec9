#include "pamlab/field.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace pamlab {

void FieldSpec::validate() const {
  if (dim < 1 || dim > kMaxDim) {
    throw std::invalid_argument("FieldSpec: dim must be in [1, " +
                                std::to_string(kMaxDim) + "]");
  }
  switch (family) {
    case Family::pareto:
      if (!(alpha > dim)) {
        throw std::invalid_argument(
            "FieldSpec: pareto requires alpha > dim, got alpha=" +
            std::to_string(alpha) + ", dim=" + std::to_string(dim));
      }
      break;
    case Family::weibull:
      if (!(gamma > 0.0) || !(gamma <= 1.0)) {
        throw std::invalid_argument(
            "FieldSpec: weibull requires gamma in (0, 1], got " +
            std::to_string(gamma));
      }
      break;
    case Family::exponential:
      break;
  }
}

Site Site::of(std::initializer_list<std::int64_t> coords) {
  if (coords.size() == 0 || coords.size() > kMaxDim) {
    throw std::invalid_argument("Site: need 1..8 coordinates");
  }
  Site z;
  z.dim = static_cast<int>(coords.size());
  int i = 0;
  for (std::int64_t v : coords) {
    z.c[i++] = v;
    z.norm1 += v < 0 ? -v : v;
  }
  return z;
}

Site Site::origin(int dim) {
  Site z;
  z.dim = dim;
  return z;
}

bool operator==(const Site& a, const Site& b) {
  if (a.dim != b.dim) return false;
  return std::equal(a.c.begin(), a.c.begin() + a.dim, b.c.begin());
}

bool site_less(const Site& a, const Site& b) {
  if (a.norm1 != b.norm1) return a.norm1 < b.norm1;
  return std::lexicographical_compare(a.c.begin(), a.c.begin() + a.dim,
                                      b.c.begin(), b.c.begin() + b.dim);
}

// --- distribution functions ------------------------------------------------

double inverse_cdf(const FieldSpec& spec, double u) {
  if (!(u >= 0.0) || !(u < 1.0)) {
    throw std::domain_error("inverse_cdf: u must lie in [0, 1)");
  }
  // log1p keeps precision in the deep tail u -> 1.
  const double l = -std::log1p(-u);  // = -log(1-u) >= 0
  switch (spec.family) {
    case Family::pareto:
      return std::exp(l / spec.alpha);
    case Family::weibull:
      return std::pow(l, 1.0 / spec.gamma);
    case Family::exponential:
      return l;
  }
  return 0.0;
}

double tail_prob(const FieldSpec& spec, double x) {
  switch (spec.family) {
    case Family::pareto:
      return x <= 1.0 ? 1.0 : std::pow(x, -spec.alpha);
    case Family::weibull:
      return x <= 0.0 ? 1.0 : std::exp(-std::pow(x, spec.gamma));
    case Family::exponential:
      return x <= 0.0 ? 1.0 : std::exp(-x);
  }
  return 0.0;
}

double field_cdf(const FieldSpec& spec, double x) {
  return 1.0 - tail_prob(spec, x);
}

double tail_quantile(const FieldSpec& spec, double p) {
  if (!(p > 0.0)) throw std::domain_error("tail_quantile: p must be > 0");
  if (p >= 1.0) {
    switch (spec.family) {
      case Family::pareto:
        return 1.0;
      default:
        return 0.0;
    }
  }
  const double l = -std::log(p);
  switch (spec.family) {
    case Family::pareto:
      return std::exp(l / spec.alpha);
    case Family::weibull:
      return std::pow(l, 1.0 / spec.gamma);
    case Family::exponential:
      return l;
  }
  return 0.0;
}

// --- site evaluation ---------------------------------------------------------

std::int64_t max_coord(int dim) {
  const int w = detail::coord_bits(dim);
  // zigzag needs one extra bit for the sign
  return (std::int64_t{1} << (w - 1)) - 1;
}

std::uint64_t encode_site(std::span<const std::int64_t> coords) {
  const int d = static_cast<int>(coords.size());
  if (d < 1 || d > kMaxDim) {
    throw std::domain_error("encode_site: dimension out of range");
  }
  const int w = detail::coord_bits(d);
  const std::int64_t lim = max_coord(d);
  std::uint64_t packed = 0;
  for (int i = 0; i < d; ++i) {
    const std::int64_t v = coords[i];
    if (v < -lim || v > lim) {
      throw std::domain_error("encode_site: coordinate " + std::to_string(v) +
                              " exceeds the supported range for dim " +
                              std::to_string(d));
    }
    packed |= detail::zigzag(v) << (i * w);
  }
  return packed;
}

double site_u01(const FieldSpec& spec, const Site& z) {
  return detail::bits_to_u01(
      detail::site_hash(spec.seed, encode_site(z.coords())));
}

double site_value(const FieldSpec& spec, const Site& z) {
  return inverse_cdf(spec, site_u01(spec, z));
}

// --- geometry ----------------------------------------------------------------

namespace {

using u128 = unsigned __int128;

constexpr u128 kU64Max = std::numeric_limits<std::uint64_t>::max();

// C(n, k) in 128 bits; throws on overflow past 2^64 * 2^32 head-room.
u128 binom_u128(std::int64_t n, int k, bool* overflow) {
  if (k < 0 || n < k) return 0;
  u128 acc = 1;
  for (int i = 1; i <= k; ++i) {
    const u128 num = static_cast<u128>(n - k + i);
    if (acc > (static_cast<u128>(-1) / num)) {
      *overflow = true;
      return 0;
    }
    acc = acc * num / static_cast<u128>(i);  // exact: product of i consecutive
  }
  return acc;
}

}  // namespace

std::uint64_t ball_size(int dim, std::int64_t r) {
  if (dim < 1 || dim > kMaxDim || r < 0) {
    throw std::invalid_argument("ball_size: need dim in [1,8], r >= 0");
  }
  // sum_k 2^k C(d,k) C(r,k): choose the k axes with nonzero coordinates.
  u128 total = 0;
  bool overflow = false;
  for (int k = 0; k <= std::min<std::int64_t>(dim, r); ++k) {
    u128 term = binom_u128(dim, k, &overflow) << k;
    u128 cr = binom_u128(r, k, &overflow);
    if (overflow || (cr != 0 && term > static_cast<u128>(-1) / cr)) {
      throw std::overflow_error("ball_size: count exceeds 64 bits");
    }
    total += term * cr;
    if (total > kU64Max) {
      throw std::overflow_error("ball_size: count exceeds 64 bits");
    }
  }
  return static_cast<std::uint64_t>(total);
}

std::uint64_t shell_size(int dim, std::int64_t r) {
  if (r == 0) return 1;
  return ball_size(dim, r) - ball_size(dim, r - 1);
}

double ball_size_bound(int dim, double r) {
  if (r < 0) return 0.0;
  // sum_k 2^k C(d,k) C(r,k) evaluated in floating point, inflated slightly.
  double total = 0.0;
  for (int k = 0; k <= dim; ++k) {
    if (r < k) break;
    double term = 1.0;
    for (int i = 1; i <= k; ++i) {
      term *= 2.0 * (r - k + i) * (dim - k + i) / (static_cast<double>(i) * i);
    }
    total += term;
  }
  return total * (1.0 + 1e-9) + 1.0;
}

std::vector<Site> shell_sites(int dim, std::int64_t r) {
  std::vector<Site> out;
  visit_shell(dim, r, [&](const Site& z) { out.push_back(z); });
  return out;
}

// --- field implementations ---------------------------------------------------

RandomField::RandomField(FieldSpec spec) : spec_(spec) { spec_.validate(); }

ExplicitField::ExplicitField(int dim, double fill) : dim_(dim), fill_(fill) {
  if (dim < 1 || dim > kMaxDim) {
    throw std::invalid_argument("ExplicitField: dim out of range");
  }
}

void ExplicitField::set(const Site& z, double v) {
  if (z.dim != dim_) throw std::invalid_argument("ExplicitField: wrong dim");
  const std::uint64_t key = encode_site(z.coords());
  for (auto& e : entries_) {
    if (e.first == key) {
      e.second = v;
      return;
    }
  }
  entries_.emplace_back(key, v);
  support_radius_ = std::max(support_radius_, z.norm1);
}

double ExplicitField::value(const Site& z) const {
  const std::uint64_t key = encode_site(z.coords());
  for (const auto& e : entries_) {
    if (e.first == key) return e.second;
  }
  return fill_;
}

}  // namespace pamlab
