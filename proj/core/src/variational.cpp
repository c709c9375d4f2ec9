#include "pamlab/variational.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pamlab/extremes.hpp"
#include "pamlab/scan.hpp"

namespace pamlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Absolute batch/block grid: 0, 32, 64, ..., growing by a factor 1.25.
// Shared by the scan loop and the certificate so that stopping radii do not
// depend on how a solve was sliced.
std::int64_t next_boundary(std::int64_t x, std::int64_t min_step) {
  std::int64_t g = 0;
  std::int64_t step = std::max<std::int64_t>(min_step, 32);
  while (g <= x) {
    g += std::max(step, g / 4);
  }
  return g;
}

double log_plus(double x) { return x > 1.0 ? std::log(x) : 0.0; }

// Raw ball count as a double (exact until ~2^53, smooth beyond).
double ball_count_f(int dim, double r) {
  if (r < 0.0) return 0.0;
  double total = 0.0;
  for (int k = 0; k <= dim; ++k) {
    if (r < k) break;
    double term = 1.0;
    for (int i = 1; i <= k; ++i) {
      term *= 2.0 * (r - k + i) * (dim - k + i) / (static_cast<double>(i) * i);
    }
    total += term;
  }
  return total;
}

// shell(d, r) <= 2^d d r^{d-1} for r >= 1 (exact for d = 1, checked in the
// test suite up to d = 8).
double shell_count_coeff(int dim) {
  return std::ldexp(static_cast<double>(dim), dim);
}

}  // namespace

double entropy_penalty(int dim, double t, double r) {
  if (r <= 0.0) return 0.0;
  return (r / t) * (std::log(r) - std::log(2.0 * dim * t) - 1.0);
}

double psi(const PotentialField& field, double t, const Site& z) {
  return field.value(z) -
         entropy_penalty(field.dim(), t, static_cast<double>(z.norm1));
}

double psi_lower(const PotentialField& field, double t, const Site& z) {
  const double v = field.value(z);
  return v - (static_cast<double>(z.norm1) / t) * log_plus(v);
}

double beat_threshold(VarKind kind, int dim, double t, double best, double r) {
  if (kind == VarKind::n) {
    return best + entropy_penalty(dim, t, r);
  }
  // Sites with xi <= 1 have psi_lower = xi <= 1, so only best >= 1 admits a
  // nontrivial threshold; below that, xi > best is the only usable filter.
  if (best < 1.0) return best;
  const double a = r / t;
  double lo = std::max({1.0, a, best});
  auto f = [&](double x) { return x - a * std::log(x); };
  if (f(lo) > best) return lo;
  double hi = lo + 1.0;
  while (f(hi) <= best) {
    hi *= 2.0;
    if (hi > 1e300) return lo;
  }
  for (int i = 0; i < 200 && (hi - lo) > 1e-10 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (f(mid) <= best) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;  // conservative end: F_bar(lo) >= F_bar(true root)
}

double tail_miss_prob(const FieldSpec& spec, double t, VarKind kind,
                      double best, std::int64_t R) {
  spec.validate();
  if (!(t > 0.0) || !std::isfinite(best)) {
    throw std::invalid_argument("tail_miss_prob: need t > 0 and finite best");
  }
  const int d = spec.dim;
  if (kind == VarKind::n) {
    const auto valid_from =
        static_cast<std::int64_t>(std::ceil(2.0 * d * std::exp(1.0) * t));
    if (R < valid_from) {
      throw std::invalid_argument(
          "tail_miss_prob: kind n needs R >= ceil(2det)");
    }
  }
  if (kind == VarKind::n_lower && best < 1.0) return 1.0;
  if (best < 0.0) return 1.0;

  const double alpha = spec.alpha;
  const double gamma = spec.family == Family::exponential ? 1.0 : spec.gamma;
  const bool pareto = spec.family == Family::pareto;

  // Radius from which the closed-form remainder is valid: thresholds grow at
  // least linearly (log factor >= 1) and the integrand is decreasing.
  double closure_from;
  if (kind == VarKind::n) {
    closure_from = 2.0 * d * std::exp(2.0) * t;
  } else {
    closure_from = std::exp(1.0) * t;
  }
  if (d > 1) {
    if (pareto) {
      closure_from =
          std::max(closure_from, (d - 1) * best * t / (alpha - d + 1));
    } else {
      closure_from = std::max(closure_from, best * t);
      closure_from = std::max(
          closure_from,
          t * std::pow((d - 1) * std::pow(2.0, 1.0 - gamma) / gamma,
                       1.0 / gamma));
    }
  }

  const double a_coeff = shell_count_coeff(d);
  double sum = 0.0;
  std::int64_t a = R + 1;
  for (int guard = 0; guard < 4096; ++guard) {
    // Try to close the remaining tail analytically at radius a.
    if (static_cast<double>(a) >= closure_from) {
      const double y0 = best + static_cast<double>(a) / t;
      if (pareto) {
        const double g_a =
            std::pow(static_cast<double>(a), d - 1) * std::pow(y0, -alpha);
        const double integral =
            std::pow(t, d) * std::pow(y0, d - alpha) / (alpha - d);
        sum += a_coeff * (g_a + integral);
        return std::min(sum, 1.0);
      }
      const double s = d / gamma;
      const double big_y = std::pow(y0, gamma);
      if (big_y >= 2.0 * s) {
        const double g_a = std::pow(static_cast<double>(a), d - 1) *
                           std::exp(-big_y);
        const double gamma_bound = std::exp((s - 1.0) * std::log(big_y) -
                                            big_y) /
                                   (1.0 - (s - 1.0) / big_y);
        const double integral = std::pow(t, d) / gamma * gamma_bound;
        sum += a_coeff * (g_a + integral);
        return std::min(sum, 1.0);
      }
    }
    // Otherwise bound one geometric block of shells exactly by count times
    // the exceedance probability at its inner edge (thresholds increase).
    const std::int64_t b = next_boundary(a, 32);
    const double x_star =
        beat_threshold(kind, d, t, best, static_cast<double>(a));
    const double count = (ball_count_f(d, static_cast<double>(b - 1)) -
                          ball_count_f(d, static_cast<double>(a - 1))) *
                             (1.0 + 1e-9) +
                         1.0;
    sum += count * tail_prob(spec, x_star);
    if (sum >= 1.0) return 1.0;
    a = b;
  }
  return 1.0;  // block budget exhausted; certify nothing
}

namespace {

struct TargetState {
  VarTarget tgt;
  double best = -kInf;
  Site argmax;
  bool frozen = false;
  double miss = 1.0;
  std::int64_t frozen_radius = 0;
  std::int64_t cert_from = 0;  // first radius where the certificate applies
};

double functional_value(VarKind kind, int dim, double t, double value,
                        double r) {
  if (kind == VarKind::n) return value - entropy_penalty(dim, t, r);
  return value - (r / t) * log_plus(value);
}

// Certificate for finitely supported fields: zero once the whole support is
// scanned and no background site can reach the threshold.
double explicit_miss(const PotentialField& field, const TargetState& st,
                     std::int64_t R) {
  if (R < field.support_radius()) return 1.0;
  const double thr = beat_threshold(st.tgt.kind, field.dim(), st.tgt.t,
                                    st.best, static_cast<double>(R + 1));
  return field.exceed_prob(thr);
}

}  // namespace

std::vector<VariationalResult> solve_many(const PotentialField& field,
                                          std::span<const VarTarget> targets,
                                          const TruncationPolicy& policy) {
  if (targets.empty()) return {};
  if (!(policy.epsilon > 0.0) || policy.epsilon > 0.5) {
    throw std::invalid_argument("solve_many: epsilon must lie in (0, 0.5]");
  }
  const FieldSpec* spec = field.spec();
  const int d = field.dim();
  const Site origin = Site::origin(d);
  const double origin_value = field.value(origin);

  std::vector<TargetState> states(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (!(targets[i].t > 0.0)) {
      throw std::invalid_argument("solve_many: need t > 0");
    }
    states[i].tgt = targets[i];
    states[i].best = origin_value;
    states[i].argmax = origin;
    if (targets[i].kind == VarKind::n) {
      states[i].cert_from = static_cast<std::int64_t>(
          std::ceil(2.0 * d * std::exp(1.0) * targets[i].t));
    } else {
      states[i].cert_from = static_cast<std::int64_t>(
          std::ceil(std::pow(targets[i].t, policy.eta)));
    }
  }

  auto process_candidate = [&](const Site& z, double value) {
    const auto r = static_cast<double>(z.norm1);
    for (auto& st : states) {
      if (st.frozen) continue;
      const double v = functional_value(st.tgt.kind, d, st.tgt.t, value, r);
      if (v > st.best) {
        st.best = v;
        st.argmax = z;
      }
    }
  };

  std::int64_t a = 0;
  bool all_frozen = false;
  while (!all_frozen) {
    const std::int64_t b =
        std::min(next_boundary(a, policy.shell_batch), policy.max_radius + 1);

    if (spec) {
      // Batch-constant raw-bit cut: no active target can improve on a site
      // below it, so the kernel only surfaces the rare threshold crossers.
      std::uint64_t joint_cut = std::uint64_t{1} << 53;
      for (const auto& st : states) {
        if (st.frozen) continue;
        double thr;
        if (st.tgt.kind == VarKind::n) {
          const double pa = entropy_penalty(d, st.tgt.t, static_cast<double>(a));
          const double pb =
              entropy_penalty(d, st.tgt.t, static_cast<double>(b - 1));
          double pen_min = std::min(pa, pb);
          const double dip = 2.0 * d * st.tgt.t;  // penalty minimum, value -2d
          if (static_cast<double>(a) <= dip && dip <= static_cast<double>(b - 1))
            pen_min = -2.0 * d;
          thr = st.best + pen_min;
        } else {
          thr = beat_threshold(VarKind::n_lower, d, st.tgt.t, st.best,
                               static_cast<double>(a));
        }
        joint_cut =
            std::min(joint_cut, scan::cut_bits_for_prob(field_cdf(*spec, thr)));
      }

      if (policy.threads > 1) {
        auto cands =
            scan::collect_exceedances(*spec, a, b, joint_cut, policy.threads);
        for (const auto& c : cands) {
          process_candidate(c.z, inverse_cdf(*spec, c.u()));
        }
      } else {
        scan::for_each_exceedance(
            *spec, a, b, joint_cut, [&](const Site& z, std::uint64_t bits) {
              process_candidate(z, inverse_cdf(*spec, detail::u53(bits)));
            });
      }
    } else {
      for (std::int64_t r = a; r < b; ++r) {
        visit_shell(d, r, [&](const Site& z) {
          process_candidate(z, field.value(z));
        });
      }
    }

    all_frozen = true;
    for (auto& st : states) {
      if (st.frozen) continue;
      const std::int64_t scanned = b - 1;
      if (scanned >= st.cert_from) {
        const double miss =
            spec ? tail_miss_prob(*spec, st.tgt.t, st.tgt.kind, st.best,
                                  scanned)
                 : explicit_miss(field, st, scanned);
        if (miss <= policy.epsilon) {
          st.frozen = true;
          st.miss = miss;
          st.frozen_radius = scanned;
        }
      }
      if (!st.frozen) all_frozen = false;
    }

    if (!all_frozen && b > policy.max_radius) {
      std::vector<VariationalResult> partial;
      for (const auto& st : states) {
        double miss = st.miss;
        if (!st.frozen && b - 1 >= st.cert_from) {
          miss = spec ? tail_miss_prob(*spec, st.tgt.t, st.tgt.kind, st.best,
                                       b - 1)
                      : explicit_miss(field, st, b - 1);
        }
        partial.push_back({st.tgt.kind, st.tgt.t, st.best, st.argmax,
                           st.argmax.norm1,
                           st.frozen ? st.frozen_radius : b - 1, miss});
      }
      throw BudgetExceeded("solve_many: certificate not reached within budget",
                           std::move(partial));
    }
    a = b;
  }

  std::vector<VariationalResult> out;
  out.reserve(states.size());
  for (const auto& st : states) {
    out.push_back({st.tgt.kind, st.tgt.t, st.best, st.argmax, st.argmax.norm1,
                   st.frozen_radius, st.miss});
  }
  return out;
}

VariationalResult solve_variational(const PotentialField& field, double t,
                                    VarKind kind,
                                    const TruncationPolicy& policy) {
  const VarTarget tgt{t, kind};
  return solve_many(field, std::span<const VarTarget>(&tgt, 1), policy)[0];
}

std::vector<VariationalResult> trace(const PotentialField& field, VarKind kind,
                                     std::span<const double> t_grid,
                                     const TruncationPolicy& policy) {
  if (t_grid.empty()) return {};
  std::vector<VarTarget> targets;
  targets.reserve(t_grid.size());
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    if (i > 0 && !(t_grid[i] > t_grid[i - 1])) {
      throw std::invalid_argument("trace: t_grid must be increasing");
    }
    targets.push_back({t_grid[i], kind});
  }
  return solve_many(field, targets, policy);
}

double bonus_region_value(const PotentialField& field, double t) {
  const auto r = static_cast<std::int64_t>(std::floor(2.0 * field.dim() * t));
  MaxSeries series(field);
  series.extend(std::max<std::int64_t>(r, 0));
  return series.value_at(std::max<std::int64_t>(r, 0)) + 2.0 * field.dim();
}

}  // namespace pamlab
