#include "pamlab/extremes.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pamlab/detail/special.hpp"
#include "pamlab/scan.hpp"

namespace pamlab {

MaxSeries::MaxSeries(const PotentialField& field) : field_(&field) {}

void MaxSeries::extend(std::int64_t r_new) {
  if (r_new < frontier_) {
    throw std::invalid_argument("MaxSeries::extend: cannot shrink frontier");
  }
  if (frontier_ < 0) {
    MaxRecord rec;
    rec.r = 0;
    rec.site = Site::origin(field_->dim());
    if (const FieldSpec* spec = field_->spec()) {
      const std::uint64_t bits =
          detail::site_hash(spec->seed, 0) >> 11;
      max_bits_ = bits;
      rec.value = inverse_cdf(*spec, detail::u53(bits));
    } else {
      rec.value = field_->value(rec.site);
    }
    records_.push_back(rec);
    frontier_ = 0;
  }
  if (r_new == frontier_) return;

  if (const FieldSpec* spec = field_->spec()) {
    // Scan in batches so the record filter tightens as records accumulate.
    std::int64_t a = frontier_ + 1;
    while (a <= r_new) {
      const std::int64_t width = std::max<std::int64_t>(64, a / 2);
      const std::int64_t b = std::min(r_new + 1, a + width);
      scan::for_each_exceedance(
          *spec, a, b, max_bits_ + 1, [&](const Site& z, std::uint64_t bits) {
            if (bits > max_bits_) {
              max_bits_ = bits;
              records_.push_back(
                  {z.norm1, inverse_cdf(*spec, detail::u53(bits)),
                   z});
            }
          });
      a = b;
    }
  } else {
    for (std::int64_t r = frontier_ + 1; r <= r_new; ++r) {
      visit_shell(field_->dim(), r, [&](const Site& z) {
        const double v = field_->value(z);
        if (v > records_.back().value) {
          records_.push_back({r, v, z});
        }
      });
    }
  }
  frontier_ = r_new;
}

const MaxRecord& MaxSeries::record_at(std::int64_t r) const {
  if (r < 0 || r > frontier_) {
    throw std::invalid_argument("MaxSeries: radius outside scanned range");
  }
  auto it = std::upper_bound(
      records_.begin(), records_.end(), r,
      [](std::int64_t rr, const MaxRecord& rec) { return rr < rec.r; });
  return *(it - 1);
}

double MaxSeries::value_at(std::int64_t r) const { return record_at(r).value; }

const Site& MaxSeries::argmax_at(std::int64_t r) const {
  return record_at(r).site;
}

OrderStats order_stats(const PotentialField& field, std::int64_t n,
                       std::int64_t i_max) {
  if (const FieldSpec* spec = field.spec()) {
    return order_stats(*spec, n, i_max);
  }
  const std::uint64_t count = ball_size(field.dim(), n);
  if (i_max < 0 || static_cast<std::uint64_t>(i_max) >= count) {
    throw std::invalid_argument("order_stats: i_max outside [0, ball_size)");
  }
  const std::size_t k = static_cast<std::size_t>(i_max) + 1;
  std::vector<double> heap;
  heap.reserve(k);
  auto cmp = [](double a, double b) { return a > b; };
  for (std::int64_t r = 0; r <= n; ++r) {
    visit_shell(field.dim(), r, [&](const Site& z) {
      const double v = field.value(z);
      if (heap.size() < k) {
        heap.push_back(v);
        std::push_heap(heap.begin(), heap.end(), cmp);
      } else if (v > heap.front()) {
        std::pop_heap(heap.begin(), heap.end(), cmp);
        heap.back() = v;
        std::push_heap(heap.begin(), heap.end(), cmp);
      }
    });
  }
  std::sort(heap.begin(), heap.end(), std::greater<>());
  OrderStats out;
  out.n = n;
  out.top = std::move(heap);
  return out;
}

OrderStats order_stats(const FieldSpec& spec, std::int64_t n,
                       std::int64_t i_max) {
  spec.validate();
  const std::uint64_t count = ball_size(spec.dim, n);
  if (i_max < 0 || static_cast<std::uint64_t>(i_max) >= count) {
    throw std::invalid_argument("order_stats: i_max outside [0, ball_size)");
  }
  const std::size_t k = static_cast<std::size_t>(i_max) + 1;

  // Min-heap of the k largest raw uniforms; converted to values at the end.
  std::vector<std::uint64_t> heap;
  heap.reserve(k);
  auto cmp = [](std::uint64_t a, std::uint64_t b) { return a > b; };
  for (std::int64_t r = 0; r <= n; ++r) {
    scan::for_each_exceedance(
        spec, r, r + 1, heap.size() < k ? 0 : heap.front() + 1,
        [&](const Site&, std::uint64_t bits) {
          if (heap.size() < k) {
            heap.push_back(bits);
            std::push_heap(heap.begin(), heap.end(), cmp);
          } else if (bits > heap.front()) {
            std::pop_heap(heap.begin(), heap.end(), cmp);
            heap.back() = bits;
            std::push_heap(heap.begin(), heap.end(), cmp);
          }
        });
  }
  std::sort(heap.begin(), heap.end(), std::greater<>());

  OrderStats out;
  out.n = n;
  out.top.reserve(k);
  for (std::uint64_t bits : heap) {
    out.top.push_back(inverse_cdf(spec, detail::u53(bits)));
  }
  return out;
}

std::int64_t index_pow(std::int64_t n, double rho) {
  return static_cast<std::int64_t>(
      std::floor(std::pow(static_cast<double>(n), rho)));
}

double exp_order_stat_cdf(std::int64_t ell, std::int64_t k, double x) {
  if (ell < 1 || k < 0 || x < 0.0) {
    throw std::invalid_argument("exp_order_stat_cdf: need ell>=1, k>=0, x>=0");
  }
  if (k >= ell) return 1.0;
  if (x == 0.0) return 0.0;
  const double le = -x;                       // log e^{-x}
  const double l1 = std::log1p(-std::exp(-x));  // log(1 - e^{-x})
  const double lgl = std::lgamma(static_cast<double>(ell) + 1.0);
  detail::LogSumExp acc;
  for (std::int64_t i = 0; i <= k; ++i) {
    const double di = static_cast<double>(i);
    const double lchoose = lgl - std::lgamma(di + 1.0) -
                           std::lgamma(static_cast<double>(ell - i) + 1.0);
    acc.add(lchoose + di * le + static_cast<double>(ell - i) * l1);
  }
  const double v = std::exp(acc.value());
  return v > 1.0 ? 1.0 : v;
}

bool EnvelopeCurve::bounds_above() const {
  switch (kind) {
    case Kind::pareto_upper:
    case Kind::weibull_upper:
    case Kind::weibull_io_lower:
      return true;  // claim of the form M_r <= curve
    case Kind::pareto_lower:
    case Kind::weibull_io_upper:
    case Kind::weibull_lower:
      return false;  // claim of the form M_r >= curve
  }
  return true;
}

double envelope(const EnvelopeCurve& curve, std::int64_t r) {
  if (r < 16) {
    throw std::domain_error("envelope: defined for r >= 16 only");
  }
  const double d = curve.dim;
  const double lr = std::log(static_cast<double>(r));
  const double llr = std::log(lr);
  const double lllr = std::log(llr);
  switch (curve.kind) {
    case EnvelopeCurve::Kind::pareto_upper: {
      const double a = curve.shape;
      return std::pow(static_cast<double>(r), d / a) * std::pow(lr, 1.0 / a) *
             std::pow(llr, 1.0 / a) * std::pow(lllr, 1.0 / a + curve.param);
    }
    case EnvelopeCurve::Kind::pareto_lower: {
      const double a = curve.shape;
      return curve.param * std::pow(static_cast<double>(r), d / a) *
             std::pow(llr, -1.0 / a);
    }
    case EnvelopeCurve::Kind::weibull_upper: {
      const double g = curve.shape;
      return std::pow(d * lr, 1.0 / g) +
             (1.0 / g) * std::pow(d * lr, 1.0 / g - 1.0) * llr +
             std::pow(lr, 1.0 / g - 1.0) * std::pow(llr, curve.param);
    }
    case EnvelopeCurve::Kind::weibull_io_upper: {
      const double g = curve.shape;
      return std::pow(d * lr, 1.0 / g) +
             (1.0 / g) * std::pow(d * lr, 1.0 / g - 1.0) * llr;
    }
    case EnvelopeCurve::Kind::weibull_lower: {
      const double g = curve.shape;
      return std::pow(d * lr, 1.0 / g) -
             (1.0 / g + curve.param) * std::pow(d * lr, 1.0 / g - 1.0) * lllr;
    }
    case EnvelopeCurve::Kind::weibull_io_lower: {
      const double g = curve.shape;
      return std::pow(d * lr, 1.0 / g) -
             (1.0 / g - curve.param) * std::pow(d * lr, 1.0 / g - 1.0) * lllr;
    }
  }
  return 0.0;
}

double envelope_violation_fraction(const FieldSpec& spec,
                                   const EnvelopeCurve& curve,
                                   std::int64_t r_lo, std::int64_t r_hi) {
  if (r_lo < 16 || r_hi <= r_lo) {
    throw std::invalid_argument(
        "envelope_violation_fraction: need 16 <= r_lo < r_hi");
  }
  RandomField field(spec);
  MaxSeries series(field);
  series.extend(r_hi);

  const bool upper = curve.bounds_above();
  std::int64_t violations = 0;
  for (std::int64_t r = r_lo; r <= r_hi; ++r) {
    const double m = series.value_at(r);
    const double c = envelope(curve, r);
    if (upper ? (m > c) : (m < c)) ++violations;
  }
  return static_cast<double>(violations) /
         static_cast<double>(r_hi - r_lo + 1);
}

}  // namespace pamlab
