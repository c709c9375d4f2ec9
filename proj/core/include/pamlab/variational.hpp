#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pamlab/field.hpp"

namespace pamlab {

// The two site functionals whose maxima sandwich the logarithmic mass:
// `n` penalizes by the walk-entropy cost (|z|/t) log(|z|/(2det)),
// `n_lower` by the potential-log cost (|z|/t) log_+ xi(z).
enum class VarKind { n, n_lower };

struct TruncationPolicy {
  double epsilon = 1e-6;          // target miss probability of the scan
  std::int64_t shell_batch = 32;  // minimum shells per certificate re-check
  double eta = 0.5;               // initial-radius heuristic exponent only
  std::int64_t max_radius = std::int64_t{1} << 44;  // scan budget
  int threads = 1;
};

struct VariationalResult {
  VarKind kind = VarKind::n;
  double t = 0.0;
  double value = 0.0;
  Site argmax_site;
  std::int64_t argmax_radius = 0;
  std::int64_t scanned_radius = 0;
  // Union bound on the probability that an unscanned site beats `value`.
  double miss_probability = 1.0;
};

class BudgetExceeded : public std::runtime_error {
 public:
  BudgetExceeded(const std::string& what, std::vector<VariationalResult> best)
      : std::runtime_error(what), best_so_far(std::move(best)) {}
  std::vector<VariationalResult> best_so_far;
};

// (r/t) log(r/(2det)) with the r = 0 limit pinned to 0.  Negative on
// (0, 2det): nearby sites are reachable at no cost.
double entropy_penalty(int dim, double t, double r);

// xi(z) - (|z|/t) log(|z|/(2det))
double psi(const PotentialField& field, double t, const Site& z);
// xi(z) - (|z|/t) log_+ xi(z)
double psi_lower(const PotentialField& field, double t, const Site& z);

// Potential level a site at radius r must exceed so that its functional
// value beats `best`.  For n_lower this solves x - (r/t) log x = best on
// the increasing branch by bisection (conservative lower end returned).
double beat_threshold(VarKind kind, int dim, double t, double best, double r);

// Rigorous upper bound on P(some site with |z| > R has functional > best):
// exact shell/block terms of sum_{r>R} shell(d,r) * F_bar(threshold(r)),
// closed with an integral-comparison remainder once the terms are certified
// monotone decreasing.  For kind n requires R >= ceil(2det).
double tail_miss_prob(const FieldSpec& spec, double t, VarKind kind,
                      double best, std::int64_t R);

struct VarTarget {
  double t = 1.0;
  VarKind kind = VarKind::n;
};

// Scans shells outward once, maintaining every target's running maximum,
// and freezes a target when its certificate drops to policy.epsilon.  A
// single-target solve and a joint solve return identical per-target
// results (same batch grid, same frozen thresholds).
std::vector<VariationalResult> solve_many(const PotentialField& field,
                                          std::span<const VarTarget> targets,
                                          const TruncationPolicy& policy);

VariationalResult solve_variational(const PotentialField& field, double t,
                                    VarKind kind,
                                    const TruncationPolicy& policy);

// Joint solve over an increasing time grid, one field scan for all of them.
std::vector<VariationalResult> trace(const PotentialField& field, VarKind kind,
                                     std::span<const double> t_grid,
                                     const TruncationPolicy& policy);

// M_{floor(2dt)} + 2d, the ball-form competitor to the site-form maximum at
// small t (the site form wins once the optimal radius clears 2dt).
double bonus_region_value(const PotentialField& field, double t);

}  // namespace pamlab
