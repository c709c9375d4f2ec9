#include "pamlab/limits.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "pamlab/detail/special.hpp"

namespace pamlab {

namespace {

// Euler-Mascheroni, 20 digits.
constexpr double kEulerGamma = 0.57721566490153286061;

}  // namespace

double theta_constant(ScaleCase scale_case, int dim, double shape) {
  if (dim < 1) throw std::domain_error("theta_constant: dim must be >= 1");
  if (scale_case == ScaleCase::pareto) {
    const double a = shape;
    if (!(a > dim)) {
      throw std::domain_error("theta_constant: pareto needs alpha > dim");
    }
    // (a-d)^d 2^d B(a-d, d) / (d^d (d-1)!) with B via log-gamma; the
    // Gamma(d) of the beta function cancels the (d-1)!.
    return std::exp(dim * std::log(a - dim) + dim * std::log(2.0) +
                    std::lgamma(a - dim) - std::lgamma(a) -
                    dim * std::log(static_cast<double>(dim)));
  }
  const double g = shape;
  if (!(g > 0.0) || !(g <= 1.0)) {
    throw std::domain_error("theta_constant: weibull needs gamma in (0,1]");
  }
  return std::exp(dim * std::log(2.0) +
                  dim * (1.0 / g - 1.0) * std::log(static_cast<double>(dim)));
}

ScaleSet scales(ScaleCase scale_case, int dim, double shape, double t,
                Centering centering) {
  ScaleSet s;
  s.scale_case = scale_case;
  s.dim = dim;
  s.shape = shape;
  s.t = t;
  s.centering = centering;
  s.theta = theta_constant(scale_case, dim, shape);
  const double d = dim;
  if (scale_case == ScaleCase::pareto) {
    if (!(t > 1.0)) throw std::domain_error("scales: pareto needs t > 1");
    const double a = shape;
    const double base = t / std::log(t);
    s.a_t = std::pow(base, d / (a - d));
    s.r_t = std::pow(base, a / (a - d));
    s.q = d / (a - d);
    s.q_lower = s.q;
    s.d_t = 0.0;
    return s;
  }
  const double g = shape;
  const double ee = std::exp(std::exp(1.0));
  if (!(t >= ee)) {
    throw std::domain_error("scales: weibull needs t >= e^e");
  }
  const double lt = std::log(t);
  const double llt = std::log(lt);
  const double lllt = std::log(llt);  // >= 0 for t >= e^e
  s.a_t = std::pow(d * lt, 1.0 / g);
  s.d_t = std::pow(d * lt, 1.0 / g - 1.0);
  s.b_t = d * (1.0 / (g * g) - 1.0 / g) * s.d_t * llt;
  s.c_t = -(d / g) * s.d_t * lllt;
  s.r_t = t * std::pow(lt, 1.0 / g - 1.0) / llt;
  s.q = std::pow(d, 1.0 - 1.0 / g) * (1.0 / g - 1.0);
  s.q_lower = std::pow(d, 1.0 - 1.0 / g) / g;
  return s;
}

double ScaleSet::centering_offset() const {
  if (scale_case == ScaleCase::pareto) return 0.0;
  if (centering == Centering::expanded) return a_t + b_t + c_t;
  const double g = shape;
  return std::pow(dim * std::log(r_t), 1.0 / g);
}

double ScaleSet::centering_scale() const {
  if (scale_case == ScaleCase::pareto) return a_t;
  if (centering == Centering::expanded) return d_t;
  const double g = shape;
  return std::pow(dim * std::log(r_t), 1.0 / g - 1.0);
}

double limit_cdf(const LimitLaw& law, double y) {
  if (law.family == LimitLaw::Family::frechet) {
    if (y <= 0.0) return 0.0;
    return std::exp(-law.theta * std::pow(y, -law.shape));
  }
  return std::exp(-law.theta * std::exp(-law.shape * y));
}

double rescale(double statistic, const ScaleSet& s, RescaleTarget target) {
  switch (target) {
    case RescaleTarget::leading_pareto:
      return statistic / s.a_t;
    case RescaleTarget::four_term_weibull:
      return (statistic - s.centering_offset()) / s.centering_scale();
    case RescaleTarget::second_term_ratio:
      return (statistic - s.a_t) / (s.d_t * std::log(std::log(s.t)));
  }
  return 0.0;
}

KsResult ks_test(std::span<const double> samples,
                 const std::function<double(double)>& cdf) {
  const std::size_t n = samples.size();
  if (n < 5) throw std::invalid_argument("ks_test: need at least 5 samples");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  double d = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double f = cdf(sorted[i]);
    const double lo = f - static_cast<double>(i) / n;
    const double hi = static_cast<double>(i + 1) / n - f;
    d = std::max({d, lo, hi});
  }
  KsResult res;
  res.d = d;
  res.p = detail::kolmogorov_q(std::sqrt(static_cast<double>(n)) * d);
  return res;
}

GumbelFit fit_gumbel(std::span<const double> samples) {
  const std::size_t n = samples.size();
  if (n < 20) throw std::invalid_argument("fit_gumbel: need >= 20 samples");
  double mean = 0.0;
  for (double x : samples) mean += x;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double x : samples) var += (x - mean) * (x - mean);
  var /= static_cast<double>(n - 1);
  if (!(var > 0.0)) {
    throw std::runtime_error("fit_gumbel: degenerate sample (zero variance)");
  }
  GumbelFit fit;
  fit.scale = std::sqrt(6.0 * var) / std::numbers::pi;
  fit.location = mean - kEulerGamma * fit.scale;
  return fit;
}

double median(std::vector<double> samples) {
  if (samples.empty()) throw std::invalid_argument("median: empty sample");
  const std::size_t mid = samples.size() / 2;
  std::nth_element(samples.begin(), samples.begin() + mid, samples.end());
  double hi = samples[mid];
  if (samples.size() % 2 == 1) return hi;
  std::nth_element(samples.begin(), samples.begin() + mid - 1,
                   samples.begin() + mid);
  return 0.5 * (hi + samples[mid - 1]);
}

}  // namespace pamlab
