#pragma once

#include <cstdint>

#include "pamlab/field.hpp"

namespace pamlab {

// Result of integrating du/dt = Lap u + xi u with u(0) = 1_0 on the box
// |z|_inf <= box_radius with zero exterior values.  log_mass is kept
// directly in the log domain: the raw mass overflows any floating range.
struct SolveResult {
  double t = 0.0;
  double log_mass = 0.0;  // log U(t) of the truncated problem
  double L = 0.0;         // log_mass / t
  std::int64_t box_radius = 0;
  std::int64_t step_count = 0;
  double renorm_log_sum = 0.0;
  bool leak_flag = false;  // significant boundary mass at the final time
};

// Splitting integrator: exact diagonal potential half-steps around an exact
// sine-basis propagator of the box Laplacian, macro step refined (with
// Richardson extrapolation of the step-halving pair) until the log mass is
// stable to tol.
SolveResult solve_ode(const PotentialField& field, double t,
                      std::int64_t box_radius, double tol);

// Single fixed-step pass, no refinement; exposes the raw splitting error
// for order checks.
SolveResult solve_ode_fixed(const PotentialField& field, double t,
                            std::int64_t box_radius, std::int64_t n_steps);

// Reference: spectral decomposition of the dense generator Lap + diag(xi)
// on the same box (<= 2000 sites), log row-sum assembled by a signed
// log-sum-exp so no scale ever overflows.
double dense_oracle(const PotentialField& field, double t,
                    std::int64_t box_radius);

// Certified Feynman-Kac sandwich on log U(t).
struct FKBounds {
  double t = 0.0;
  double lower_log = 0.0;
  double upper_log = 0.0;
  Site lower_witness;
  double lower_rho = 0.0;
  std::int64_t upper_cutoff = 0;  // jump counts summed exactly up to here
  double jump_rate = 0.0;         // Poisson parameter 2dt
  double epsilon = 0.0;           // certificate level of the upper bound
};

// Exact strategy bound: walk straight to the witness site by time rho*t and
// sit there.  Valid for every sample; larger search radii only improve it.
// Witnesses are restricted to |z|_1 <= search_radius (monotone routes stay
// inside any box containing that ball).
FKBounds fk_lower(const PotentialField& field, double t,
                  std::int64_t search_radius);

// Jump-count upper bound sum_n e^{t M_n - 2dt} (2dt)^n / n!, evaluated in
// the log domain; the unscanned part of the field is controlled by a
// threshold curve that holds except with probability epsilon, and its
// contribution is kept below 1e-9 relative.
FKBounds fk_upper(const PotentialField& field, double t, double epsilon);

}  // namespace pamlab
