#include "pamlab/solver.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "pamlab/detail/special.hpp"
#include "pamlab/extremes.hpp"

namespace pamlab {

namespace {

constexpr std::int64_t kDenseSiteCap = 2000;
constexpr std::int64_t kOdeSiteCap = std::int64_t{1} << 22;

std::int64_t box_site_count(int dim, std::int64_t radius) {
  std::int64_t n = 1;
  for (int i = 0; i < dim; ++i) {
    if (n > kOdeSiteCap) return kOdeSiteCap + 1;
    n *= 2 * radius + 1;
  }
  return n;
}

// Values over the box |z|_inf <= radius, odometer order (last axis fastest).
std::vector<double> box_values(const PotentialField& field,
                               std::int64_t radius) {
  const int d = field.dim();
  const std::int64_t m = 2 * radius + 1;
  const std::int64_t n = box_site_count(d, radius);
  std::vector<double> vals(static_cast<std::size_t>(n));
  Site z = Site::origin(d);
  for (int i = 0; i < d; ++i) z.c[i] = -radius;
  for (std::int64_t idx = 0;; ++idx) {
    z.norm1 = 0;
    for (int i = 0; i < d; ++i) z.norm1 += std::abs(z.c[i]);
    vals[static_cast<std::size_t>(idx)] = field.value(z);
    int axis = d - 1;
    while (axis >= 0 && z.c[axis] == radius) {
      z.c[axis] = -radius;
      --axis;
    }
    if (axis < 0) break;
    ++z.c[axis];
  }
  return vals;
}

// Orthonormal eigenbasis of the 1-D Dirichlet hop Laplacian on m points:
// v_k(j) = sqrt(2/(m+1)) sin(pi (j+1)(k+1)/(m+1)),
// lambda_k = -4 sin^2(pi (k+1) / (2(m+1))).
void sine_basis(std::int64_t m, Eigen::MatrixXd& v, Eigen::VectorXd& lambda) {
  v.resize(m, m);
  lambda.resize(m);
  const double pi = std::numbers::pi;
  const double norm = std::sqrt(2.0 / (m + 1));
  for (std::int64_t k = 0; k < m; ++k) {
    const double s = std::sin(pi * (k + 1) / (2.0 * (m + 1)));
    lambda[k] = -4.0 * s * s;
    for (std::int64_t j = 0; j < m; ++j) {
      v(j, k) = norm * std::sin(pi * (j + 1) * (k + 1) / (m + 1));
    }
  }
}

struct OdeWorkspace {
  int dim;
  std::int64_t m;  // points per axis
  std::int64_t n;  // total sites
  Eigen::VectorXd xi;
  Eigen::MatrixXd prop;  // exp(h * Lap_axis), rebuilt per step size
  Eigen::MatrixXd basis;
  Eigen::VectorXd lambda;

  void build_propagator(double h) {
    prop = basis *
           (lambda.array() * h).exp().matrix().asDiagonal() *
           basis.transpose();
  }

  // In-place exp(h Lap) via per-axis dense propagators.
  void apply_laplacian(Eigen::VectorXd& u) const {
    if (dim == 1) {
      u = prop * u;
      return;
    }
    const std::int64_t lines = n / m;
    Eigen::VectorXd line(m);
    for (int axis = 0; axis < dim; ++axis) {
      std::int64_t stride = 1;
      for (int i = axis + 1; i < dim; ++i) stride *= m;
      for (std::int64_t ln = 0; ln < lines; ++ln) {
        // base index of this line: insert axis coordinate back into the
        // mixed-radix index
        const std::int64_t outer = ln / stride;
        const std::int64_t inner = ln % stride;
        const std::int64_t base = outer * stride * m + inner;
        for (std::int64_t j = 0; j < m; ++j) line[j] = u[base + j * stride];
        line = prop * line;
        for (std::int64_t j = 0; j < m; ++j) u[base + j * stride] = line[j];
      }
    }
  }
};

struct RawRun {
  double log_mass;
  double renorm_log_sum;
  bool leak;
};

RawRun strang_run(OdeWorkspace& ws, double t, std::int64_t n_steps,
                  std::int64_t radius) {
  const double h = t / static_cast<double>(n_steps);
  ws.build_propagator(h);
  Eigen::VectorXd half = (0.5 * h * ws.xi.array()).exp();

  Eigen::VectorXd u = Eigen::VectorXd::Zero(ws.n);
  u[(ws.n - 1) / 2] = 1.0;  // origin
  double logsum = 0.0;
  for (std::int64_t s = 0; s < n_steps; ++s) {
    u.array() *= half.array();
    ws.apply_laplacian(u);
    u.array() *= half.array();
    const double scale = u.maxCoeff();
    if (!(scale > 0.0) || !std::isfinite(scale)) {
      throw std::runtime_error("solve_ode: non-finite or vanished solution");
    }
    u /= scale;
    logsum += std::log(scale);
  }

  // Boundary occupation check for the leak flag.
  bool leak = false;
  const std::int64_t m = ws.m;
  Site idx = Site::origin(ws.dim);
  (void)idx;
  {
    // any site with a coordinate at +-radius
    std::vector<std::int64_t> coord(ws.dim, 0);
    for (std::int64_t i = 0; i < ws.n && !leak; ++i) {
      std::int64_t rem = i;
      bool boundary = false;
      for (int ax = ws.dim - 1; ax >= 0; --ax) {
        const std::int64_t c = rem % m;
        rem /= m;
        if (c == 0 || c == m - 1) boundary = true;
      }
      if (boundary && u[i] > 1e-10) leak = true;
    }
  }
  (void)radius;

  return {logsum + std::log(u.sum()), logsum, leak};
}

OdeWorkspace make_workspace(const PotentialField& field, double t,
                            std::int64_t box_radius) {
  if (box_radius < 1) {
    throw std::invalid_argument("solve_ode: box_radius must be >= 1");
  }
  if (!(t >= 0.0)) throw std::invalid_argument("solve_ode: need t >= 0");
  const int d = field.dim();
  const std::int64_t n = box_site_count(d, box_radius);
  if (n > kOdeSiteCap) {
    throw std::runtime_error("solve_ode: box exceeds the memory budget");
  }
  OdeWorkspace ws;
  ws.dim = d;
  ws.m = 2 * box_radius + 1;
  ws.n = n;
  const auto vals = box_values(field, box_radius);
  ws.xi = Eigen::Map<const Eigen::VectorXd>(vals.data(),
                                            static_cast<std::int64_t>(n));
  // Fold the -2d diagonal of the hop Laplacian into the potential so the
  // sine basis (which diagonalizes the pure hop part) applies unchanged:
  // Lap = (sum_axis S_axis) - 2d I with S the neighbor-sum stencil.
  // sine_basis already carries the -2 per axis, so nothing to fold here.
  sine_basis(ws.m, ws.basis, ws.lambda);
  return ws;
}

}  // namespace

SolveResult solve_ode_fixed(const PotentialField& field, double t,
                            std::int64_t box_radius, std::int64_t n_steps) {
  OdeWorkspace ws = make_workspace(field, t, box_radius);
  SolveResult res;
  res.t = t;
  res.box_radius = box_radius;
  if (t == 0.0) return res;
  const RawRun run = strang_run(ws, t, n_steps, box_radius);
  res.log_mass = run.log_mass;
  res.L = run.log_mass / t;
  res.step_count = n_steps;
  res.renorm_log_sum = run.renorm_log_sum;
  res.leak_flag = run.leak;
  return res;
}

SolveResult solve_ode(const PotentialField& field, double t,
                      std::int64_t box_radius, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("solve_ode: need tol > 0");
  OdeWorkspace ws = make_workspace(field, t, box_radius);
  SolveResult res;
  res.t = t;
  res.box_radius = box_radius;
  if (t == 0.0) return res;

  // Step halving with Romberg acceleration: the symmetric splitting has an
  // even-power error expansion in the macro step.
  constexpr int kMaxLevels = 16;
  std::int64_t n_steps = std::max<std::int64_t>(8, std::llround(t * 4.0));
  double table[kMaxLevels][kMaxLevels];
  RawRun last = strang_run(ws, t, n_steps, box_radius);
  table[0][0] = last.log_mass;
  for (int k = 1; k < kMaxLevels; ++k) {
    n_steps *= 2;
    last = strang_run(ws, t, n_steps, box_radius);
    table[k][0] = last.log_mass;
    double weight = 1.0;
    for (int j = 1; j <= k; ++j) {
      weight *= 4.0;
      table[k][j] =
          (weight * table[k][j - 1] - table[k - 1][j - 1]) / (weight - 1.0);
    }
    if (k >= 2 && std::fabs(table[k][k] - table[k - 1][k - 1]) < tol) {
      res.log_mass = table[k][k];
      res.L = res.log_mass / t;
      res.step_count = n_steps;
      res.renorm_log_sum = last.renorm_log_sum;
      res.leak_flag = last.leak;
      return res;
    }
  }
  throw std::runtime_error("solve_ode: step refinement did not converge");
}

double dense_oracle(const PotentialField& field, double t,
                    std::int64_t box_radius) {
  if (box_radius < 0) {
    throw std::invalid_argument("dense_oracle: box_radius must be >= 0");
  }
  if (!(t >= 0.0)) throw std::invalid_argument("dense_oracle: need t >= 0");
  const int d = field.dim();
  const std::int64_t n = box_site_count(d, box_radius);
  if (n > kDenseSiteCap) {
    throw std::invalid_argument("dense_oracle: box larger than 2000 sites");
  }
  const std::int64_t m = 2 * box_radius + 1;
  const auto vals = box_values(field, box_radius);

  Eigen::MatrixXd gen = Eigen::MatrixXd::Zero(n, n);
  for (std::int64_t i = 0; i < n; ++i) {
    gen(i, i) = vals[static_cast<std::size_t>(i)] - 2.0 * d;
    std::int64_t stride = 1;
    for (int ax = d - 1; ax >= 0; --ax) {
      const std::int64_t c = (i / stride) % m;
      if (c > 0) gen(i, i - stride) = 1.0;
      if (c < m - 1) gen(i, i + stride) = 1.0;
      stride *= m;
    }
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gen);
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("dense_oracle: eigensolve failed");
  }
  const Eigen::VectorXd& lam = es.eigenvalues();
  const Eigen::MatrixXd& v = es.eigenvectors();
  const std::int64_t origin = (n - 1) / 2;

  // U(t) = sum_k c_k e^{t lam_k} with c_k = v_k(0) * sum_z v_k(z);
  // signed log-sum-exp keeps it finite for any t.
  double max_log = detail::kNegInf;
  std::vector<double> logs(static_cast<std::size_t>(n));
  std::vector<double> signs(static_cast<std::size_t>(n));
  for (std::int64_t k = 0; k < n; ++k) {
    const double c = v(origin, k) * v.col(k).sum();
    if (c == 0.0) {
      logs[k] = detail::kNegInf;
      signs[k] = 0.0;
      continue;
    }
    logs[k] = t * lam[k] + std::log(std::fabs(c));
    signs[k] = c > 0.0 ? 1.0 : -1.0;
    max_log = std::max(max_log, logs[k]);
  }
  double acc = 0.0;
  for (std::int64_t k = 0; k < n; ++k) {
    if (signs[k] != 0.0) acc += signs[k] * std::exp(logs[k] - max_log);
  }
  if (!(acc > 0.0)) {
    throw std::runtime_error("dense_oracle: nonpositive mass accumulation");
  }
  return max_log + std::log(acc);
}

FKBounds fk_lower(const PotentialField& field, double t,
                  std::int64_t search_radius) {
  if (!(t > 0.0)) throw std::invalid_argument("fk_lower: need t > 0");
  const int d = field.dim();
  FKBounds out;
  out.t = t;
  out.jump_rate = 2.0 * d * t;

  const Site origin = Site::origin(d);
  // rho -> 0 limit of the sit-at-z strategy: stay home the whole time.
  double best = t * field.value(origin) - 2.0 * d * t;
  Site best_site = origin;
  double best_rho = 0.0;

  for (std::int64_t r = 1; r <= search_radius; ++r) {
    visit_shell(d, r, [&](const Site& z) {
      const double xi = field.value(z);
      if (!(xi > 0.0)) return;
      const double rr = static_cast<double>(r);
      double rho = rr / (t * xi);
      rho = std::clamp(rho, 1e-12, 1.0 - 1e-12);
      const double bound = t * (1.0 - rho) * xi - 2.0 * d * t +
                           rr * std::log(rho * t) -
                           std::lgamma(rr + 1.0);
      if (bound > best) {
        best = bound;
        best_site = z;
        best_rho = rho;
      }
    });
  }
  out.lower_log = best;
  out.lower_witness = best_site;
  out.lower_rho = best_rho;
  return out;
}

FKBounds fk_upper(const PotentialField& field, double t, double epsilon) {
  if (!(t > 0.0)) throw std::invalid_argument("fk_upper: need t > 0");
  if (!(epsilon > 0.0) || epsilon >= 1.0) {
    throw std::invalid_argument("fk_upper: epsilon must lie in (0,1)");
  }
  const int d = field.dim();
  const double rate = 2.0 * d * t;
  const FieldSpec* spec = field.spec();

  FKBounds out;
  out.t = t;
  out.jump_rate = rate;
  out.epsilon = spec ? epsilon : 0.0;

  // Exact part: jump counts up to n1, with M_n from the realized field.
  std::int64_t n1 = std::max<std::int64_t>(
      64, static_cast<std::int64_t>(std::ceil(4.0 * std::exp(1.0) * rate)));
  n1 = std::max(n1, field.support_radius());

  MaxSeries series(field);
  series.extend(n1);

  detail::LogSumExp main;
  double max_term = detail::kNegInf;
  for (std::int64_t n = 0; n <= n1; ++n) {
    const double term = t * series.value_at(n) - rate +
                        n * std::log(rate) - std::lgamma(n + 1.0);
    main.add(term);
    max_term = std::max(max_term, term);
  }

  // Threshold curve for the unscanned region: per-shell budget eps r^{-c}/Z
  // with c inside (1, alpha - d + 1) so the resulting growth stays
  // sublinear and the jump-count series converges.
  double c_exp = 2.0;
  if (spec && spec->family == Family::pareto) {
    c_exp = std::min(2.0, 1.0 + 0.5 * (spec->alpha - d));
  }
  const double z_norm = std::pow(static_cast<double>(n1), 1.0 - c_exp) /
                        (c_exp - 1.0);
  const double a_coeff = std::ldexp(static_cast<double>(d), d);
  auto mu = [&](std::int64_t r) -> double {
    if (!spec) return field.fill_value();
    const double shells = a_coeff * std::pow(static_cast<double>(r),
                                             static_cast<double>(d - 1));
    const double budget =
        epsilon * std::pow(static_cast<double>(r), -c_exp) / z_norm / shells;
    return tail_quantile(*spec, std::min(budget, 1.0));
  };

  const double m_n1 = series.value_at(n1);
  detail::LogSumExp rem;
  double rem_peak = detail::kNegInf;
  double prev_term = detail::kNegInf;
  std::int64_t n = n1;
  int decay_streak = 0;
  for (;;) {
    ++n;
    const double level = std::max(m_n1, mu(n));
    const double term =
        t * level - rate + n * std::log(rate) - std::lgamma(n + 1.0);
    rem.add(term);
    rem_peak = std::max(rem_peak, term);
    if (term < prev_term - std::numbers::ln2) {
      ++decay_streak;
    } else {
      decay_streak = 0;
    }
    // Once terms decay by at least log 2 per step they keep doing so (the
    // threshold curve has nonincreasing increments while log(rate/n)
    // falls), so the rest is dominated by a geometric series.
    if (decay_streak >= 8 && term < rem_peak - 80.0) {
      rem.add(term);  // bounds sum_{j>=1} e^{term - j log 2} = e^{term}
      break;
    }
    if (n > n1 + 100000000) {
      throw std::runtime_error("fk_upper: remainder series did not decay");
    }
  }

  const double main_log = main.value();
  const double rem_log = rem.value();
  if (rem_log > main_log + std::log(1e-9)) {
    throw std::runtime_error(
        "fk_upper: unscanned remainder above the relative target; "
        "increase the scan cutoff");
  }
  out.upper_log = detail::log_add_exp(main_log, rem_log);
  out.upper_cutoff = n1;
  return out;
}

}  // namespace pamlab
