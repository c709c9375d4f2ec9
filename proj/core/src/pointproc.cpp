#include "pamlab/pointproc.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <ostream>
#include <stdexcept>

#include "pamlab/detail/special.hpp"
#include "pamlab/scan.hpp"

namespace pamlab {

namespace {

double radial_coeff(int dim) {
  // surface factor of the 1-norm ball: vol{|x|_1 <= s} = 2^d s^d / d!
  return std::exp(dim * std::log(2.0) - std::lgamma(static_cast<double>(dim)));
}

double rate_q(const IntensityModel& m) {
  switch (m.kind) {
    case IntensityModel::Kind::nu_pareto:
      return m.dim / (m.shape - m.dim);
    case IntensityModel::Kind::nu_weibull:
      return std::pow(static_cast<double>(m.dim), 1.0 - 1.0 / m.shape) *
             (1.0 / m.shape - 1.0);
    case IntensityModel::Kind::nu_lower_weibull:
      return std::pow(static_cast<double>(m.dim), 1.0 - 1.0 / m.shape) /
             m.shape;
    default:
      return 0.0;
  }
}

// Adaptive Simpson with absolute tolerance.
double adaptive_simpson(const std::function<double(double)>& f, double a,
                        double b, double tol, int depth = 0) {
  const double m = 0.5 * (a + b);
  const double fa = f(a);
  const double fm = f(m);
  const double fb = f(b);
  std::function<double(double, double, double, double, double, double, double,
                       int)>
      rec = [&](double x0, double x2, double f0, double f1, double f2,
                double whole, double eps, int d) -> double {
    const double x1l = 0.5 * (x0 + 0.5 * (x0 + x2));
    const double x1r = 0.5 * (0.5 * (x0 + x2) + x2);
    const double xm = 0.5 * (x0 + x2);
    const double fl = f(x1l);
    const double fr = f(x1r);
    const double left = (xm - x0) / 6.0 * (f0 + 4.0 * fl + f1);
    const double right = (x2 - xm) / 6.0 * (f1 + 4.0 * fr + f2);
    const double delta = left + right - whole;
    if (d > 40) {
      throw std::runtime_error("quadrature: tolerance unreachable");
    }
    if (std::fabs(delta) <= 15.0 * eps) {
      return left + right + delta / 15.0;
    }
    return rec(x0, xm, f0, fl, f1, left, 0.5 * eps, d + 1) +
           rec(xm, x2, f1, fr, f2, right, 0.5 * eps, d + 1);
  };
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return rec(a, b, fa, fm, fb, whole, tol, depth);
}

struct YMarginal {
  // Integral over y >= tau of the y-density at radial distance s, plus a
  // cut point and tail bound for fully numeric integration.
  std::function<double(double)> density;  // (s, y) -> value, s bound outside
  double y_lo;
  double y_hi;
  double tail_bound;
};

}  // namespace

double intensity_mass(const IntensityModel& model, const Region& region) {
  const double tau = region.tau;
  if (region.x_lo < 0.0 || region.x_hi < region.x_lo) {
    throw std::invalid_argument("intensity_mass: bad |x| window");
  }
  if (region.x_hi == region.x_lo) return 0.0;
  const bool full_x = std::isinf(region.x_hi) && region.x_lo == 0.0;
  const int d = model.dim;
  const double shape = model.shape;

  switch (model.kind) {
    case IntensityModel::Kind::mu_pareto:
      if (tau <= 0.0) {
        throw std::invalid_argument("intensity_mass: mu_pareto diverges "
                                    "at floors <= 0");
      }
      return std::pow(tau, -shape);
    case IntensityModel::Kind::mu_weibull:
      return std::exp(-shape * tau);
    case IntensityModel::Kind::nu_pareto: {
      const double a = shape;
      if (!(a > d)) {
        throw std::invalid_argument("intensity_mass: nu_pareto needs a > d");
      }
      const double q = rate_q(model);
      const double tp = std::max(tau, 0.0);
      if (tp == 0.0 && region.x_lo == 0.0) {
        throw std::invalid_argument(
            "intensity_mass: nu_pareto diverges at floor <= 0 over a window "
            "touching x = 0");
      }
      if (full_x) {
        // theta tau^{d-a}
        return theta_constant(ScaleCase::pareto, d, a) * std::pow(tp, d - a);
      }
      if (d == 1) {
        const double lo = std::pow(tp + q * region.x_lo, 1.0 - a);
        const double hi = std::isinf(region.x_hi)
                              ? 0.0
                              : std::pow(tp + q * region.x_hi, 1.0 - a);
        return 2.0 / (q * (a - 1.0)) * (lo - hi);
      }
      // generic window: radial quadrature of the exact y-marginal
      const double cd = radial_coeff(d);
      auto f = [&](double s) {
        return cd * std::pow(s, d - 1) * std::pow(tp + q * s, -a);
      };
      double hi = region.x_hi;
      if (std::isinf(hi)) {
        hi = std::max(region.x_lo + 1.0, 2.0 * tp / q);
        while (cd * std::pow(q, -a) * std::pow(hi, d - a) / (a - d) > 1e-12) {
          hi *= 2.0;
        }
      }
      return adaptive_simpson(f, region.x_lo, hi, 1e-10);
    }
    case IntensityModel::Kind::nu_weibull:
    case IntensityModel::Kind::nu_lower_weibull: {
      const double g = shape;
      const double q = rate_q(model);
      if (!(q > 0.0)) {
        throw std::invalid_argument(
            "intensity_mass: degenerate radial rate (gamma = 1 upper kind)");
      }
      if (full_x) {
        // e^{-g tau} (2/(g q))^d
        return std::exp(-g * tau + d * std::log(2.0 / (g * q)));
      }
      if (d == 1) {
        const double lo = std::exp(-g * q * region.x_lo);
        const double hi =
            std::isinf(region.x_hi) ? 0.0 : std::exp(-g * q * region.x_hi);
        return std::exp(-g * tau) * 2.0 / (g * q) * (lo - hi);
      }
      const double cd = radial_coeff(d);
      auto f = [&](double s) {
        return cd * std::pow(s, d - 1) * std::exp(-g * (tau + q * s));
      };
      double hi = region.x_hi;
      if (std::isinf(hi)) {
        hi = region.x_lo + (80.0 + 2.0 * d * std::log(1.0 + region.x_lo +
                                                      80.0 / (g * q))) /
                               (g * q);
      }
      return adaptive_simpson(f, region.x_lo, hi, 1e-10);
    }
  }
  return 0.0;
}

double quadrature_oracle(const IntensityModel& model, const Region& region) {
  const double tau = region.tau;
  if (region.x_lo < 0.0 || region.x_hi < region.x_lo) {
    throw std::invalid_argument("quadrature_oracle: bad |x| window");
  }
  if (region.x_hi == region.x_lo) return 0.0;
  const int d = model.dim;
  const double shape = model.shape;

  // y-direction: numeric integral of the density to a certified cut.
  auto y_integral = [&](double offset) -> double {
    // density at y: pareto a (y+offset)^{-a-1} on y>0; weibull
    // g e^{-g(y+offset)}
    if (model.kind == IntensityModel::Kind::mu_pareto ||
        model.kind == IntensityModel::Kind::nu_pareto) {
      const double a = shape;
      const double lo = std::max(tau, 0.0);
      double hi = (lo + offset + 1.0) * std::pow(1e12, 1.0 / a);
      auto f = [&](double y) {
        return a * std::pow(y + offset, -a - 1.0);
      };
      return adaptive_simpson(f, lo, hi, 1e-12);
    }
    const double g = shape;
    const double lo = tau;
    const double hi = tau + 70.0 / g;
    auto f = [&](double y) { return g * std::exp(-g * (y + offset)); };
    return adaptive_simpson(f, lo, hi, 1e-12 * std::exp(-g * offset));
  };

  switch (model.kind) {
    case IntensityModel::Kind::mu_pareto:
      if (tau <= 0.0) {
        throw std::invalid_argument("quadrature_oracle: divergent region");
      }
      return y_integral(0.0);
    case IntensityModel::Kind::mu_weibull:
      return y_integral(0.0);
    default:
      break;
  }

  const double q = rate_q(model);
  const bool pareto = model.kind == IntensityModel::Kind::nu_pareto;
  if (pareto && std::max(tau, 0.0) == 0.0 && region.x_lo == 0.0) {
    throw std::invalid_argument("quadrature_oracle: divergent region");
  }
  if (!pareto && !(q > 0.0)) {
    throw std::invalid_argument("quadrature_oracle: degenerate radial rate");
  }

  const double cd = radial_coeff(d);
  auto f = [&](double s) {
    return cd * std::pow(s, d - 1) * y_integral(q * s);
  };

  double hi = region.x_hi;
  if (std::isinf(hi)) {
    if (pareto) {
      const double a = shape;
      hi = std::max(region.x_lo + 1.0, 2.0 * std::max(tau, 0.0) / q);
      while (cd * std::pow(q, -a) * std::pow(hi, d - a) / (a - d) > 1e-12) {
        hi *= 2.0;
      }
    } else {
      const double g = shape;
      hi = region.x_lo + (80.0 + 2.0 * d) / (g * q) +
           2.0 * d / (g * q) * std::log(2.0 + region.x_lo);
    }
  }
  if (hi <= region.x_lo) return 0.0;
  return adaptive_simpson(f, region.x_lo, hi, 1e-10);
}

PointPattern build_pattern(const FieldSpec& spec, double t, PatternKind kind,
                           double tau, const TruncationPolicy& policy,
                           double x_window) {
  spec.validate();
  if (!(t > 0.0)) throw std::invalid_argument("build_pattern: need t > 0");
  const bool pareto = spec.family == Family::pareto;
  const ScaleSet sc =
      pareto ? scales(ScaleCase::pareto, spec.dim, spec.alpha, t)
             : scales(ScaleCase::weibull, spec.dim,
                      spec.family == Family::exponential ? 1.0 : spec.gamma, t,
                      Centering::compact);
  const bool windowed = std::isfinite(x_window);
  if (kind == PatternKind::raw_field && !windowed) {
    throw std::invalid_argument(
        "build_pattern: raw_field requires a finite |x| window");
  }
  if (pareto && tau < 0.0 && !windowed) {
    throw std::invalid_argument(
        "build_pattern: pareto patterns need tau >= 0 or a finite window");
  }

  // Floor in potential / functional units.
  const double y_scale = pareto ? sc.a_t : sc.centering_scale();
  const double y_offset = pareto ? 0.0 : sc.centering_offset();
  const double floor_value = y_offset + tau * y_scale;

  PointPattern pat;
  pat.t = t;
  pat.kind = kind;
  pat.tau = tau;
  pat.x_window = x_window;

  const int d = spec.dim;
  const std::int64_t r_stop_window =
      windowed ? static_cast<std::int64_t>(std::ceil(x_window * sc.r_t)) : -1;
  const auto cert_from = static_cast<std::int64_t>(
      std::ceil(2.0 * d * std::exp(1.0) * t));

  auto threshold_at = [&](double r) -> double {
    switch (kind) {
      case PatternKind::psi:
        return beat_threshold(VarKind::n, d, t, floor_value, r);
      case PatternKind::psi_lower:
        return beat_threshold(VarKind::n_lower, d, t, floor_value, r);
      case PatternKind::raw_field:
        return floor_value;
    }
    return floor_value;
  };
  auto rescaled = [&](const Site& z, double value) -> double {
    switch (kind) {
      case PatternKind::psi:
        return (value - entropy_penalty(d, t, static_cast<double>(z.norm1)) -
                y_offset) /
               y_scale;
      case PatternKind::psi_lower: {
        const double lp = value > 1.0 ? std::log(value) : 0.0;
        return (value - (static_cast<double>(z.norm1) / t) * lp - y_offset) /
               y_scale;
      }
      case PatternKind::raw_field:
        return (value - y_offset) / y_scale;
    }
    return 0.0;
  };

  std::int64_t a = 0;
  std::int64_t batch_step = std::max<std::int64_t>(policy.shell_batch, 32);
  for (;;) {
    std::int64_t b = a + std::max(batch_step, a / 4);
    if (windowed) b = std::min(b, r_stop_window + 1);

    double thr = threshold_at(static_cast<double>(a));
    if (kind == PatternKind::psi) {
      // entropy penalty dips to -2d at r = 2dt inside the batch
      const double pb = threshold_at(static_cast<double>(b - 1));
      thr = std::min(thr, pb);
      const double dip = 2.0 * d * t;
      if (static_cast<double>(a) <= dip && dip <= static_cast<double>(b - 1)) {
        thr = std::min(thr, floor_value - 2.0 * d);
      }
    }
    const std::uint64_t cut =
        scan::cut_bits_for_prob(field_cdf(spec, thr));
    scan::for_each_exceedance(
        spec, a, b, cut, [&](const Site& z, std::uint64_t bits) {
          const double value = inverse_cdf(spec, detail::u53(bits));
          const double y = rescaled(z, value);
          if (y >= tau &&
              (!windowed ||
               static_cast<double>(z.norm1) <= x_window * sc.r_t)) {
            PatternPoint p;
            p.z = z;
            p.x_norm = static_cast<double>(z.norm1) / sc.r_t;
            p.y = y;
            p.x.resize(d);
            for (int i = 0; i < d; ++i) {
              p.x[i] = static_cast<double>(z.c[i]) / sc.r_t;
            }
            pat.points.push_back(std::move(p));
          }
        });

    if (windowed && b > r_stop_window) {
      pat.miss_probability = 0.0;
      break;
    }
    if (!windowed && b - 1 >= cert_from) {
      const VarKind vk =
          kind == PatternKind::psi_lower ? VarKind::n_lower : VarKind::n;
      const double miss = tail_miss_prob(spec, t, vk, floor_value, b - 1);
      if (miss <= policy.epsilon) {
        pat.miss_probability = miss;
        break;
      }
    }
    if (b > policy.max_radius) {
      throw std::runtime_error("build_pattern: scan budget exceeded");
    }
    a = b;
  }
  return pat;
}

void write_pattern_csv(std::ostream& os, const PointPattern& pattern) {
  int d = 1;
  if (!pattern.points.empty()) {
    d = static_cast<int>(pattern.points.front().x.size());
  }
  for (int i = 0; i < d; ++i) os << "x_" << (i + 1) << ",";
  os << "y\n";
  char buf[64];
  auto put = [&](double v) {
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    os.write(buf, end - buf);
    (void)ec;
  };
  for (const auto& p : pattern.points) {
    for (double x : p.x) {
      put(x);
      os << ",";
    }
    put(p.y);
    os << "\n";
  }
}

GofResult poisson_gof(std::span<const std::int64_t> counts,
                      std::span<const double> expected) {
  if (counts.size() != expected.size()) {
    throw std::invalid_argument("poisson_gof: size mismatch");
  }
  if (counts.size() < 5) {
    throw std::invalid_argument("poisson_gof: need at least 5 regions");
  }
  double chi2 = 0.0;
  std::size_t df = 0;
  double disp_num = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double e = expected[i];
    const double o = static_cast<double>(counts[i]);
    if (e <= 0.0) {
      if (o != 0.0) {
        throw std::invalid_argument(
            "poisson_gof: zero expectation with nonzero count");
      }
      continue;  // degenerate empty cell
    }
    chi2 += (o - e) * (o - e) / e;
    disp_num += (o - e) * (o - e) / e;
    ++df;
  }
  GofResult res;
  res.chi2 = chi2;
  if (df == 0) {
    res.p = 1.0;
    res.dispersion = 1.0;
    return res;
  }
  res.p = detail::gamma_q(0.5 * static_cast<double>(df), 0.5 * chi2);
  res.dispersion = disp_num / static_cast<double>(df);
  return res;
}

void pool_cells(std::vector<std::int64_t>& counts,
                std::vector<double>& expected, double min_expected) {
  if (counts.size() != expected.size()) {
    throw std::invalid_argument("pool_cells: size mismatch");
  }
  bool merged = true;
  while (merged && expected.size() > 1) {
    merged = false;
    for (std::size_t i = 0; i < expected.size(); ++i) {
      if (expected[i] < min_expected) {
        const std::size_t j = i + 1 < expected.size() ? i + 1 : i - 1;
        expected[std::min(i, j)] += expected[std::max(i, j)];
        counts[std::min(i, j)] += counts[std::max(i, j)];
        expected.erase(expected.begin() + static_cast<std::ptrdiff_t>(
                                               std::max(i, j)));
        counts.erase(counts.begin() +
                     static_cast<std::ptrdiff_t>(std::max(i, j)));
        merged = true;
        break;
      }
    }
  }
}

}  // namespace pamlab
