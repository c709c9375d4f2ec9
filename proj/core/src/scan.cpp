#include "pamlab/scan.hpp"

#include <cmath>
#include <thread>

namespace pamlab::scan {

std::uint64_t cut_bits_for_prob(double p) {
  if (p >= 1.0) return std::uint64_t{1} << 53;  // nothing can pass
  if (p <= 0.0) return 0;
  double scaled = std::floor(p * 0x1.0p53);
  if (scaled < 0.0) scaled = 0.0;
  if (scaled >= 0x1.0p53) scaled = 0x1.0p53 - 1.0;
  return static_cast<std::uint64_t>(scaled);
}

namespace {

// Splits [r0, r1) into chunks of roughly equal site count.
std::vector<std::int64_t> chunk_boundaries(int dim, std::int64_t r0,
                                           std::int64_t r1, int chunks) {
  std::vector<std::int64_t> bounds;
  bounds.push_back(r0);
  const double v0 = std::pow(static_cast<double>(r0 > 0 ? r0 : 0), dim);
  const double v1 = std::pow(static_cast<double>(r1), dim);
  for (int i = 1; i < chunks; ++i) {
    const double v = v0 + (v1 - v0) * i / chunks;
    auto r = static_cast<std::int64_t>(std::llround(std::pow(v, 1.0 / dim)));
    if (r <= bounds.back()) r = bounds.back() + 1;
    if (r >= r1) break;
    bounds.push_back(r);
  }
  bounds.push_back(r1);
  return bounds;
}

}  // namespace

std::vector<Candidate> collect_exceedances(const FieldSpec& spec,
                                           std::int64_t r_begin,
                                           std::int64_t r_end,
                                           std::uint64_t cut_bits,
                                           int threads) {
  std::vector<Candidate> out;
  if (r_end <= r_begin) return out;
  if (threads <= 1 || r_end - r_begin < 4 * threads) {
    for_each_exceedance(spec, r_begin, r_end, cut_bits,
                        [&](const Site& z, std::uint64_t bits) {
                          out.push_back({z, bits});
                        });
    return out;
  }

  const auto bounds = chunk_boundaries(spec.dim, r_begin, r_end, threads);
  const int n = static_cast<int>(bounds.size()) - 1;
  std::vector<std::vector<Candidate>> parts(n);
  std::vector<std::thread> pool;
  pool.reserve(n);
  for (int i = 0; i < n; ++i) {
    pool.emplace_back([&, i] {
      for_each_exceedance(spec, bounds[i], bounds[i + 1], cut_bits,
                          [&](const Site& z, std::uint64_t bits) {
                            parts[i].push_back({z, bits});
                          });
    });
  }
  for (auto& th : pool) th.join();
  for (auto& part : parts) {
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

}  // namespace pamlab::scan
