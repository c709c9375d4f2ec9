#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace pamlab {

inline constexpr int kMaxDim = 8;

enum class Family { pareto, weibull, exponential };

// An i.i.d. potential over Z^d, fully determined by (family, shape, dim,
// seed).  Site evaluation is a pure function: the same site under the same
// spec yields bit-identical values in any evaluation order and on any
// thread, so the (conceptually infinite) field can be scanned lazily.
struct FieldSpec {
  Family family = Family::pareto;
  double alpha = 2.0;  // pareto shape, requires alpha > dim
  double gamma = 0.5;  // weibull shape in (0, 1]
  int dim = 1;
  std::uint64_t seed = 0;

  // Throws std::invalid_argument listing the violated constraint.
  void validate() const;
};

// Lattice site with its cached 1-norm.
struct Site {
  std::array<std::int64_t, kMaxDim> c{};
  int dim = 0;
  std::int64_t norm1 = 0;

  static Site of(std::initializer_list<std::int64_t> coords);
  static Site origin(int dim);
  std::span<const std::int64_t> coords() const {
    return {c.data(), static_cast<std::size_t>(dim)};
  }
};

bool operator==(const Site& a, const Site& b);
// Orders by 1-norm, then lexicographically by coordinates.  Used for
// deterministic tie-breaking of argmax sites.
bool site_less(const Site& a, const Site& b);

// --- distribution functions ------------------------------------------------

// F^{-1}(u) for u in [0,1); throws std::domain_error otherwise.
double inverse_cdf(const FieldSpec& spec, double u);
// P(xi > x); total on the reals (1 below the support).
double tail_prob(const FieldSpec& spec, double x);
// P(xi <= x) = 1 - tail_prob.
double field_cdf(const FieldSpec& spec, double x);
// Smallest x with P(xi > x) <= p, i.e. the upper-tail quantile.
double tail_quantile(const FieldSpec& spec, double p);

// --- counter-based site evaluation -----------------------------------------

namespace detail {

// splitmix64 finalizer; bijective on 64-bit words.
inline std::uint64_t mix64(std::uint64_t h) {
  h ^= h >> 30;
  h *= 0xbf58476d1ce4e5b9ull;
  h ^= h >> 27;
  h *= 0x94d049bb133111ebull;
  h ^= h >> 31;
  return h;
}

inline std::uint64_t zigzag(std::int64_t x) {
  return (static_cast<std::uint64_t>(x) << 1) ^
         static_cast<std::uint64_t>(x >> 63);
}

// Per-coordinate field width of the packed encoding.
inline int coord_bits(int dim) { return 64 / dim; }

// Two finalizer rounds over (seed XOR packed coordinates).
inline std::uint64_t site_hash(std::uint64_t seed, std::uint64_t packed) {
  std::uint64_t h = seed ^ packed;
  h = mix64(h + 0x9e3779b97f4a7c15ull);
  h = mix64(h ^ 0xd1b54a32d192ed03ull);
  return h;
}

// Top 53 bits as a uniform in [0,1).
inline double bits_to_u01(std::uint64_t h) {
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

// Already-shifted 53-bit word to a uniform in [0,1).
inline double u53(std::uint64_t bits) {
  return static_cast<double>(bits) * 0x1.0p-53;
}

}  // namespace detail

// Zig-zag each coordinate, then concatenate fixed-width fields (64/d bits
// per coordinate, d <= 8).  Injective on the supported coordinate range;
// throws std::domain_error outside it.
std::uint64_t encode_site(std::span<const std::int64_t> coords);
// Largest coordinate magnitude the encoding supports for this dimension.
std::int64_t max_coord(int dim);

double site_u01(const FieldSpec& spec, const Site& z);
double site_value(const FieldSpec& spec, const Site& z);

// --- 1-norm lattice geometry ------------------------------------------------

// Exact |{z in Z^d : |z|_1 <= r}|; throws std::overflow_error if the count
// does not fit a 64-bit integer.
std::uint64_t ball_size(int dim, std::int64_t r);
std::uint64_t shell_size(int dim, std::int64_t r);
// Upper bound on the ball size as a double, usable far beyond the 64-bit
// range (relative slack below 1e-9).
double ball_size_bound(int dim, double r);

// Visits every site with |z|_1 == r exactly once, in lexicographic
// coordinate order.
template <class Visitor>
void visit_shell(int dim, std::int64_t r, Visitor&& visit) {
  Site z;
  z.dim = dim;
  z.norm1 = r;
  auto rec = [&](auto&& self, int axis, std::int64_t left) -> void {
    if (axis == dim - 1) {
      if (left == 0) {
        z.c[axis] = 0;
        visit(static_cast<const Site&>(z));
      } else {
        z.c[axis] = -left;
        visit(static_cast<const Site&>(z));
        z.c[axis] = left;
        visit(static_cast<const Site&>(z));
      }
      return;
    }
    for (std::int64_t v = -left; v <= left; ++v) {
      z.c[axis] = v;
      self(self, axis + 1, left - (v < 0 ? -v : v));
    }
  };
  rec(rec, 0, r);
}

std::vector<Site> shell_sites(int dim, std::int64_t r);

// --- explicit fields for tests and hand-built scenarios ---------------------

// Abstract potential: a value per site plus tail information for
// truncation certificates over unscanned regions.
class PotentialField {
 public:
  virtual ~PotentialField() = default;
  virtual int dim() const = 0;
  virtual double value(const Site& z) const = 0;
  // Exceedance probability of a site not fixed by the field description.
  virtual double exceed_prob(double x) const = 0;
  // Spec when the field is distribution-backed, nullptr otherwise.
  virtual const FieldSpec* spec() const { return nullptr; }
  // For finitely supported fields: radius beyond which every value equals
  // the fill value; -1 when not applicable.
  virtual std::int64_t support_radius() const { return -1; }
  virtual double fill_value() const { return 0.0; }
};

class RandomField final : public PotentialField {
 public:
  explicit RandomField(FieldSpec spec);
  int dim() const override { return spec_.dim; }
  double value(const Site& z) const override { return site_value(spec_, z); }
  double exceed_prob(double x) const override { return tail_prob(spec_, x); }
  const FieldSpec* spec() const override { return &spec_; }

 private:
  FieldSpec spec_;
};

// Finitely many pinned values over a constant background.
class ExplicitField final : public PotentialField {
 public:
  ExplicitField(int dim, double fill = 0.0);
  void set(const Site& z, double v);
  int dim() const override { return dim_; }
  double value(const Site& z) const override;
  double exceed_prob(double x) const override { return x >= fill_ ? 0.0 : 1.0; }
  std::int64_t support_radius() const override { return support_radius_; }
  double fill_value() const override { return fill_; }

 private:
  int dim_;
  double fill_;
  std::int64_t support_radius_ = 0;
  std::vector<std::pair<std::uint64_t, double>> entries_;  // encoded -> value
};

}  // namespace pamlab
