#pragma once

#include <cstdint>
#include <vector>

#include "pamlab/field.hpp"

// Exceedance-driven shell scanning.  The hot loop touches each site once,
// mixes its counter into 53 uniform bits and compares against a threshold;
// only the rare sites above the threshold are materialized.  Kernels for
// d = 1 and d = 2 walk packed counters directly, the generic kernel covers
// d <= 8.  Enumeration order is shells ascending, lexicographic within a
// shell, so candidate lists are deterministic.

namespace pamlab::scan {

struct Candidate {
  Site z;
  std::uint64_t bits = 0;  // top-53 uniform bits of the site hash
  double u() const { return static_cast<double>(bits) * 0x1.0p-53; }
};

// Calls sink(site, bits) for every site with |z|_1 in [r_begin, r_end)
// whose 53-bit uniform is >= cut_bits, in scan order.
template <class Sink>
void for_each_exceedance(const FieldSpec& spec, std::int64_t r_begin,
                         std::int64_t r_end, std::uint64_t cut_bits,
                         Sink&& sink) {
  const std::uint64_t seed = spec.seed;
  if (r_begin < 0) r_begin = 0;
  if (r_end <= r_begin) return;

  if (r_begin == 0) {
    Site z = Site::origin(spec.dim);
    const std::uint64_t bits = detail::site_hash(seed, 0) >> 11;
    if (bits >= cut_bits) sink(z, bits);
    r_begin = 1;
  }

  if (spec.dim == 1) {
    // zigzag(-r) = 2r-1 and zigzag(+r) = 2r: shells [a, b) are exactly the
    // consecutive counters [2a-1, 2b-1).
    const std::uint64_t n0 = 2 * static_cast<std::uint64_t>(r_begin) - 1;
    const std::uint64_t n1 = 2 * static_cast<std::uint64_t>(r_end) - 1;
    for (std::uint64_t n = n0; n < n1; ++n) {
      const std::uint64_t bits = detail::site_hash(seed, n) >> 11;
      if (bits >= cut_bits) {
        const std::int64_t r = static_cast<std::int64_t>((n + 1) >> 1);
        Site z = Site::origin(1);
        z.c[0] = (n & 1) ? -r : r;
        z.norm1 = r;
        sink(z, bits);
      }
    }
    return;
  }

  if (spec.dim == 2) {
    for (std::int64_t r = r_begin; r < r_end; ++r) {
      for (std::int64_t c0 = -r; c0 <= r; ++c0) {
        const std::int64_t inner = r - (c0 < 0 ? -c0 : c0);
        const std::uint64_t p0 = detail::zigzag(c0);
        if (inner == 0) {
          const std::uint64_t bits = detail::site_hash(seed, p0) >> 11;
          if (bits >= cut_bits) {
            Site z = Site::origin(2);
            z.c[0] = c0;
            z.norm1 = r;
            sink(z, bits);
          }
          continue;
        }
        const std::uint64_t lo =
            detail::site_hash(seed, p0 | (detail::zigzag(-inner) << 32)) >> 11;
        if (lo >= cut_bits) {
          Site z = Site::origin(2);
          z.c[0] = c0;
          z.c[1] = -inner;
          z.norm1 = r;
          sink(z, lo);
        }
        const std::uint64_t hi =
            detail::site_hash(seed, p0 | (detail::zigzag(inner) << 32)) >> 11;
        if (hi >= cut_bits) {
          Site z = Site::origin(2);
          z.c[0] = c0;
          z.c[1] = inner;
          z.norm1 = r;
          sink(z, hi);
        }
      }
    }
    return;
  }

  for (std::int64_t r = r_begin; r < r_end; ++r) {
    visit_shell(spec.dim, r, [&](const Site& z) {
      const std::uint64_t bits =
          detail::site_hash(seed, encode_site(z.coords())) >> 11;
      if (bits >= cut_bits) sink(z, bits);
    });
  }
}

// Parallel variant; candidates are returned in scan order regardless of the
// thread count.
std::vector<Candidate> collect_exceedances(const FieldSpec& spec,
                                           std::int64_t r_begin,
                                           std::int64_t r_end,
                                           std::uint64_t cut_bits,
                                           int threads);

// Raw 53-bit threshold for "u > p"; sites at or above the returned cut are
// a superset of {u > p}.
std::uint64_t cut_bits_for_prob(double p);

}  // namespace pamlab::scan
