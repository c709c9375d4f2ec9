#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <span>
#include <vector>

#include "pamlab/field.hpp"
#include "pamlab/limits.hpp"
#include "pamlab/variational.hpp"

namespace pamlab {

// Rescaled exceedance patterns.  psi / psi_lower place a point at
// (z/r_t, rescaled functional value) for every site whose value clears the
// floor; raw_field does the same for the plain potential at scale r.
enum class PatternKind { psi, psi_lower, raw_field };

struct PatternPoint {
  Site z;
  double x_norm = 0.0;  // |z|_1 / r_t
  double y = 0.0;
  std::vector<double> x;  // z / r_t, coordinate-wise
};

struct PointPattern {
  double t = 0.0;
  PatternKind kind = PatternKind::psi;
  double tau = 0.0;
  double x_window = std::numeric_limits<double>::infinity();
  double miss_probability = 0.0;
  std::vector<PatternPoint> points;
};

// Scans the certified region and keeps every site whose rescaled value is
// >= tau.  Pareto uses y = psi/a_t (floor must be >= 0), weibull kinds use
// y = (psi - a_{r_t}) / d_{r_t}.  A finite x_window restricts to
// |z| <= x_window * r_t (and is required for raw_field, whose unwindowed
// mass is infinite).
PointPattern build_pattern(const FieldSpec& spec, double t, PatternKind kind,
                           double tau, const TruncationPolicy& policy,
                           double x_window =
                               std::numeric_limits<double>::infinity());

void write_pattern_csv(std::ostream& os, const PointPattern& pattern);

// Analytic limit intensities of the patterns above.
struct IntensityModel {
  enum class Kind {
    mu_pareto,         // alpha y^{-alpha-1} dy on y > 0
    mu_weibull,        // gamma e^{-gamma y} dy
    nu_pareto,         // dx (x) alpha (y + q|x|)^{-alpha-1} 1{y>0} dy
    nu_weibull,        // dx (x) gamma e^{-gamma(y + q|x|)} dy
    nu_lower_weibull,  // same with rate q_lower
  };
  Kind kind = Kind::nu_pareto;
  int dim = 1;
  double shape = 2.0;  // alpha or gamma
};

struct Region {
  double tau = 0.0;  // floor on y
  double x_lo = 0.0;
  double x_hi = std::numeric_limits<double>::infinity();
};

// Expected point count over the region; closed form where available,
// quadrature otherwise.  Throws on divergent regions.
double intensity_mass(const IntensityModel& model, const Region& region);

// Independent adaptive-quadrature evaluation of the same mass, error below
// 1e-8 (throws if the tolerance is unreachable).
double quadrature_oracle(const IntensityModel& model, const Region& region);

struct GofResult {
  double chi2 = 0.0;
  double p = 1.0;
  double dispersion = 1.0;  // mean of (O-E)^2 / E, ~1 under Poisson counts
};

// Chi-square goodness of fit of counts against Poisson means over disjoint
// regions (>= 5 cells, expectations >= 1 after any pooling by the caller).
GofResult poisson_gof(std::span<const std::int64_t> counts,
                      std::span<const double> expected);

// Greedy adjacent pooling until every expectation reaches min_expected.
void pool_cells(std::vector<std::int64_t>& counts,
                std::vector<double>& expected, double min_expected);

}  // namespace pamlab
