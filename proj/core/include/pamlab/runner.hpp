#pragma once

#include <string>

#include "pamlab/config.hpp"

#include "json.hpp"

namespace pamlab {

struct RunSummary {
  bool all_pass = false;
  nlohmann::json summary;
  std::string out_dir;
};

// Executes the configured experiment: data-parallel over samples, one
// deterministic field per (master_seed, sample index).  Writes
// samples.csv, summary.json and plot-data CSVs under cfg.out_dir; existing
// complete per-sample rows are reused instead of recomputed.
RunSummary run(const ExperimentConfig& cfg);

// Shortest round-trip decimal rendering used for all CSV/JSON floats.
std::string format_double(double v);

}  // namespace pamlab
