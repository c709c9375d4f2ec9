#pragma once

#include <functional>
#include <span>
#include <vector>

namespace pamlab {

enum class ScaleCase { pareto, weibull };
enum class Centering { expanded, compact };

// Scaling functions of one time point.  Pareto: a_t = (t/log t)^{d/(a-d)}
// and r_t = (t/log t)^{a/(a-d)}.  Weibull: the four-term expansion
// a_t, b_t, c_t with fluctuation scale d_t = (d log t)^{1/g-1} and radius
// scale r_t = t (log t)^{1/g-1} / loglog t.  Compact centering replaces
// a_t + b_t + c_t by a_{r_t} and d_t by d_{r_t}; the two differ by o(d_t).
struct ScaleSet {
  ScaleCase scale_case = ScaleCase::pareto;
  int dim = 1;
  double shape = 2.0;  // alpha or gamma
  double t = 0.0;
  double a_t = 0.0;
  double b_t = 0.0;
  double c_t = 0.0;
  double d_t = 0.0;
  double r_t = 0.0;
  double q = 0.0;        // radial cost rate of the n-functional pattern
  double q_lower = 0.0;  // same for the n_lower pattern (weibull only)
  double theta = 0.0;
  Centering centering = Centering::compact;

  double centering_offset() const;  // what is subtracted from the statistic
  double centering_scale() const;   // what the difference is divided by
};

// Limit-law constant: pareto (a-d)^d 2^d B(a-d, d) / (d^d (d-1)!), weibull
// 2^d d^{d(1/g-1)}.
double theta_constant(ScaleCase scale_case, int dim, double shape);

ScaleSet scales(ScaleCase scale_case, int dim, double shape, double t,
                Centering centering = Centering::compact);

struct LimitLaw {
  enum class Family { frechet, gumbel } family = Family::frechet;
  double theta = 1.0;
  double shape = 1.0;  // frechet tail exponent (a-d) or gumbel rate (g)
};

// P(Y <= y): frechet exp(-theta y^{-shape}) for y > 0, gumbel
// exp(-theta e^{-shape y}).
double limit_cdf(const LimitLaw& law, double y);

enum class RescaleTarget { leading_pareto, four_term_weibull, second_term_ratio };

double rescale(double statistic, const ScaleSet& s, RescaleTarget target);

struct KsResult {
  double d = 0.0;
  double p = 1.0;
};

// One-sample Kolmogorov-Smirnov against a cdf callable; asymptotic p-value
// from the Kolmogorov series.  Needs >= 5 samples.
KsResult ks_test(std::span<const double> samples,
                 const std::function<double(double)>& cdf);

struct GumbelFit {
  double location = 0.0;
  double scale = 1.0;
};

// Method-of-moments fit: scale = sd sqrt(6)/pi, location = mean - gamma_E *
// scale.  Needs >= 20 samples; throws on zero variance.
GumbelFit fit_gumbel(std::span<const double> samples);

double median(std::vector<double> samples);

}  // namespace pamlab
