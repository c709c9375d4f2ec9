#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pamlab/field.hpp"
#include "pamlab/limits.hpp"

namespace pamlab {

enum class ExperimentKind { ensemble, trace, sandwich, gof, envelopes, constants };

const char* to_string(ExperimentKind kind);

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::ensemble;
  Family family = Family::pareto;
  int dim = 1;
  double alpha = 0.0;  // pareto shape
  double gamma = 0.0;  // weibull shape
  std::vector<double> t_grid;  // one entry for single-t experiments
  std::int64_t samples = 1;
  std::uint64_t master_seed = 1;
  double epsilon = 1e-6;
  Centering centering = Centering::compact;
  int threads = 0;  // 0 = hardware concurrency
  std::string out_dir = "pamlab_out";

  // experiment-specific knobs (documented defaults)
  double tau = 0.5;            // gof floor
  int bands = 10;              // gof |x| bands
  double x_window = 16.0;      // gof window in |x| units
  std::string sandwich_mode = "exact";  // exact | asymptotic
  std::int64_t box_radius = 0;          // 0 = auto
  double ode_tol = 1e-8;
  std::int64_t r_lo = 0, r_hi = 0;      // envelope window (0 = defaults)
  double rho = 0.25;           // pareto upper-envelope exponent
  double c_lower = 0.5;        // lower-envelope prefactor / weibull slack
  double delta = 0.5;          // weibull upper-envelope slack exponent

  FieldSpec field_spec(std::uint64_t seed) const;
  double shape() const {
    return family == Family::pareto ? alpha : gamma;
  }
};

// Parse failure carrying every violation, not just the first.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> violations);
  std::vector<std::string> violations;
};

// key = value lines grouped under [section] headers; '#' and ';' comments.
// Unknown keys, domain violations and duplicate keys are all collected.
ExperimentConfig parse_config(const std::string& text,
                              std::optional<ExperimentKind> cli_kind = {});

// Injective per-sample seed stream: golden-ratio step mixed through the
// site hash, so runs are reproducible and resumable at any thread count.
std::uint64_t derive_sample_seed(std::uint64_t master_seed,
                                 std::uint64_t sample_index);

}  // namespace pamlab
