#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "pamlab/runner.hpp"

using namespace pamlab;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig tiny_ensemble(const std::string& out) {
  return parse_config(R"(
[experiment]
experiment = ensemble
case = pareto
d = 1
alpha = 4
t = 50
samples = 1
master_seed = 9

[output]
out_dir = )" + out + "\n");
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("single-sample ensemble writes one data row") {
  const auto dir = fresh_dir("pamlab_test_single");
  const auto summary = run(tiny_ensemble(dir.string()));
  const std::string csv = slurp(dir / "samples.csv");
  CHECK(csv.rfind("sample_id,seed,t,N,N_lower,argmax_radius_N,"
                  "argmax_radius_Nlower,miss_prob,rescaled_N,rescaled_Nlower",
                  0) == 0);
  int newlines = 0;
  for (char c : csv) newlines += c == '\n';
  CHECK(newlines == 2);  // header + one row
  CHECK(summary.all_pass);
}

TEST_CASE("summary json carries the documented keys") {
  const auto dir = fresh_dir("pamlab_test_keys");
  const auto summary = run(tiny_ensemble(dir.string()));
  for (const char* key : {"config", "n_samples", "ks", "gumbel_fit", "gof",
                          "pass", "runtime_seconds"}) {
    CHECK(summary.summary.contains(key));
  }
  CHECK(summary.summary["n_samples"] == 1);
}

TEST_CASE("reruns are byte-identical and resume from partial files") {
  const auto dir = fresh_dir("pamlab_test_rerun");
  auto cfg = tiny_ensemble(dir.string());
  cfg.samples = 4;
  run(cfg);
  const std::string first = slurp(dir / "samples.csv");

  run(cfg);
  CHECK(slurp(dir / "samples.csv") == first);

  // drop the last row: the missing sample is recomputed identically
  std::string truncated = first;
  const auto cut = truncated.find_last_of('\n', truncated.size() - 2);
  truncated.resize(cut + 1);
  {
    std::ofstream out(dir / "samples.csv", std::ios::binary | std::ios::trunc);
    out << truncated;
  }
  fs::remove(dir / "summary.json");
  run(cfg);
  CHECK(slurp(dir / "samples.csv") == first);
}

TEST_CASE("constants experiment verifies the intensity identities") {
  const auto dir = fresh_dir("pamlab_test_constants");
  const auto cfg = parse_config(R"(
[experiment]
experiment = constants
[output]
out_dir = )" + dir.string() + "\n");
  const auto summary = run(cfg);
  CHECK(summary.all_pass);
  CHECK(summary.summary["pass"]["identities_within_1e-6"] == true);
}

TEST_CASE("exact sandwich experiment holds the orderings") {
  const auto dir = fresh_dir("pamlab_test_sandwich");
  const auto cfg = parse_config(R"(
[experiment]
experiment = sandwich
case = weibull
d = 1
gamma = 0.5
t = 2
samples = 3
sandwich_mode = exact
box_radius = 30
ode_tol = 1e-9
[output]
out_dir = )" + dir.string() + "\n");
  const auto summary = run(cfg);
  CHECK(summary.all_pass);
  CHECK(summary.summary["pass"]["sandwich_ordering"] == true);
  const std::string csv = slurp(dir / "samples.csv");
  CHECK(csv.find("L_ode,fk_lower,fk_upper,box_radius") != std::string::npos);
}

TEST_CASE("gof experiment produces the test statistics") {
  const auto dir = fresh_dir("pamlab_test_gof");
  const auto cfg = parse_config(R"(
[experiment]
experiment = gof
case = pareto
d = 1
alpha = 4
t = 1e4
tau = 0.5
bands = 5
samples = 40
epsilon = 1e-2
[output]
out_dir = )" + dir.string() + "\n");
  const auto summary = run(cfg);
  CHECK(summary.summary["gof"].contains("chi2"));
  CHECK(summary.summary["gof"].contains("p"));
  CHECK(summary.summary["detail"].contains("dispersion"));
}

TEST_CASE("float formatting round-trips") {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 123456.789, -2.5e17}) {
    const std::string s = format_double(v);
    CHECK(std::stod(s) == v);
  }
}
