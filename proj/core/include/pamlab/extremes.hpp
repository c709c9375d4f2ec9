#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pamlab/field.hpp"

namespace pamlab {

// A new running-maximum record: M_r jumps to `value` at radius r.
struct MaxRecord {
  std::int64_t r = 0;
  double value = 0.0;
  Site site;
};

// Running maximum M_r = max_{|z| <= r} xi(z), extended incrementally.
// Between records the series is constant, so only records are stored;
// value_at(r) is exact for any r up to the frontier.
class MaxSeries {
 public:
  explicit MaxSeries(const PotentialField& field);

  // Extends coverage to radius r_new (>= frontier, else std::invalid_argument).
  void extend(std::int64_t r_new);

  std::int64_t frontier() const { return frontier_; }
  double value_at(std::int64_t r) const;
  const Site& argmax_at(std::int64_t r) const;
  std::span<const MaxRecord> records() const { return records_; }

 private:
  const MaxRecord& record_at(std::int64_t r) const;

  const PotentialField* field_;
  std::int64_t frontier_ = -1;
  std::uint64_t max_bits_ = 0;  // fast path: record filter on raw uniform bits
  std::vector<MaxRecord> records_;
};

// Descending order statistics over the ball of radius n.
struct OrderStats {
  std::int64_t n = 0;
  std::vector<double> top;  // top[i] = (i+1)-th largest value, i <= i_max
};

// Throws std::invalid_argument unless 0 <= i_max < ball_size(d, n).
OrderStats order_stats(const FieldSpec& spec, std::int64_t n,
                       std::int64_t i_max);
OrderStats order_stats(const PotentialField& field, std::int64_t n,
                       std::int64_t i_max);

// floor(n^rho), the index sequences used with upper order statistics.
std::int64_t index_pow(std::int64_t n, double rho);

// Exact CDF of the (k+1)-th largest of ell i.i.d. standard exponentials,
// evaluated in the log domain so ell up to 1e7 is fine.
double exp_order_stat_cdf(std::int64_t ell, std::int64_t k, double x);

// Deterministic bound lines for M_r.  The pareto lines carry a free
// exponent/prefactor; the weibull family has four lines (eventual and
// infinitely-often, upper and lower).
struct EnvelopeCurve {
  enum class Kind {
    pareto_upper,     // r^{d/a} (log r)^{1/a} (llog r)^{1/a} (lllog r)^{1/a+rho}
    pareto_lower,     // c r^{d/a} (llog r)^{-1/a}
    weibull_upper,    // three-term expansion plus a (llog r)^delta slack
    weibull_io_upper, // two-term expansion, reached infinitely often
    weibull_lower,    // leading term minus (1/g + c) third-order correction
    weibull_io_lower, // leading term minus (1/g - c) third-order correction
  };

  Kind kind = Kind::pareto_upper;
  int dim = 1;
  double shape = 2.0;  // alpha (pareto) or gamma (weibull)
  double param = 0.0;  // rho, c or delta depending on the kind

  // Direction of the inequality the curve asserts about M_r.
  bool bounds_above() const;
};

// Curve value at integer radius r; iterated logs need r >= 16.
double envelope(const EnvelopeCurve& curve, std::int64_t r);

// Fraction of radii in [r_lo, r_hi] where the realized M_r violates the
// curve's inequality.
double envelope_violation_fraction(const FieldSpec& spec,
                                   const EnvelopeCurve& curve,
                                   std::int64_t r_lo, std::int64_t r_hi);

}  // namespace pamlab
