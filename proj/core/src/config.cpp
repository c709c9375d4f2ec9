#include "pamlab/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <map>
#include <sstream>

namespace pamlab {

const char* to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::ensemble: return "ensemble";
    case ExperimentKind::trace: return "trace";
    case ExperimentKind::sandwich: return "sandwich";
    case ExperimentKind::gof: return "gof";
    case ExperimentKind::envelopes: return "envelopes";
    case ExperimentKind::constants: return "constants";
  }
  return "?";
}

FieldSpec ExperimentConfig::field_spec(std::uint64_t seed) const {
  FieldSpec spec;
  spec.family = family;
  spec.alpha = alpha;
  spec.gamma = gamma;
  spec.dim = dim;
  spec.seed = seed;
  return spec;
}

ConfigError::ConfigError(std::vector<std::string> v)
    : std::runtime_error([&v] {
        std::string msg = "invalid config:";
        for (const auto& s : v) msg += "\n  - " + s;
        return msg;
      }()),
      violations(std::move(v)) {}

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

struct RawEntry {
  std::string value;
  int line;
};

struct Parser {
  std::map<std::string, RawEntry> entries;  // "section.key" -> value
  std::vector<std::string> errors;

  void load(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::string section = "experiment";
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find_first_of("#;");
      if (hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']') {
          errors.push_back("line " + std::to_string(lineno) +
                           ": malformed section header");
          continue;
        }
        section = trim(line.substr(1, line.size() - 2));
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        errors.push_back("line " + std::to_string(lineno) +
                         ": expected key = value");
        continue;
      }
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      const std::string full = section + "." + key;
      if (auto it = entries.find(full); it != entries.end()) {
        errors.push_back("line " + std::to_string(lineno) + ": duplicate key '" +
                         key + "' (first set on line " +
                         std::to_string(it->second.line) + ")");
        continue;
      }
      entries[full] = {value, lineno};
    }
  }

  std::optional<std::string> take(const std::string& full) {
    auto it = entries.find(full);
    if (it == entries.end()) return std::nullopt;
    std::string v = it->second.value;
    entries.erase(it);
    return v;
  }

  template <class T>
  void number(const std::string& full, T& out) {
    auto raw = take(full);
    if (!raw) return;
    const char* b = raw->data();
    const char* e = b + raw->size();
    if constexpr (std::is_floating_point_v<T>) {
      char* endp = nullptr;
      const double v = std::strtod(b, &endp);
      if (endp != e || raw->empty()) {
        errors.push_back("key '" + full + "': not a number: '" + *raw + "'");
        return;
      }
      out = static_cast<T>(v);
    } else {
      T v{};
      // allow scientific notation for integral keys too (1e6 samples)
      char* endp = nullptr;
      const double dv = std::strtod(b, &endp);
      if (endp != e || raw->empty() || dv != std::floor(dv) ||
          std::fabs(dv) > 1.8e18) {
        errors.push_back("key '" + full + "': not an integer: '" + *raw + "'");
        return;
      }
      v = static_cast<T>(dv);
      out = v;
    }
  }

  void text(const std::string& full, std::string& out) {
    if (auto raw = take(full)) out = *raw;
  }
};

std::vector<double> parse_t_list(const std::string& s,
                                 std::vector<std::string>& errors) {
  std::vector<double> out;
  // geometric grid a:b:n
  const auto c1 = s.find(':');
  if (c1 != std::string::npos) {
    const auto c2 = s.find(':', c1 + 1);
    if (c2 == std::string::npos) {
      errors.push_back("t_grid: expected lo:hi:count");
      return out;
    }
    const double lo = std::strtod(s.substr(0, c1).c_str(), nullptr);
    const double hi = std::strtod(s.substr(c1 + 1, c2 - c1 - 1).c_str(),
                                  nullptr);
    const long n = std::strtol(s.substr(c2 + 1).c_str(), nullptr, 10);
    if (!(lo > 0.0) || !(hi > lo) || n < 2) {
      errors.push_back("t_grid: need 0 < lo < hi and count >= 2");
      return out;
    }
    for (long i = 0; i < n; ++i) {
      out.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1)));
    }
    return out;
  }
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    char* endp = nullptr;
    const double v = std::strtod(item.c_str(), &endp);
    if (endp != item.c_str() + item.size()) {
      errors.push_back("t value not a number: '" + item + "'");
      return out;
    }
    out.push_back(v);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text,
                              std::optional<ExperimentKind> cli_kind) {
  Parser p;
  p.load(text);
  ExperimentConfig cfg;

  if (auto ex = p.take("experiment.experiment")) {
    bool ok = false;
    for (ExperimentKind k :
         {ExperimentKind::ensemble, ExperimentKind::trace,
          ExperimentKind::sandwich, ExperimentKind::gof,
          ExperimentKind::envelopes, ExperimentKind::constants}) {
      if (*ex == to_string(k)) {
        cfg.experiment = k;
        ok = true;
      }
    }
    if (!ok) {
      p.errors.push_back("experiment: unknown kind '" + *ex + "'");
    } else if (cli_kind && *cli_kind != cfg.experiment) {
      p.errors.push_back(std::string("experiment '") +
                         to_string(cfg.experiment) +
                         "' does not match the CLI subcommand '" +
                         to_string(*cli_kind) + "'");
    }
  } else if (cli_kind) {
    cfg.experiment = *cli_kind;
  } else {
    p.errors.push_back("missing key: experiment");
  }

  if (auto c = p.take("experiment.case")) {
    if (*c == "pareto") {
      cfg.family = Family::pareto;
    } else if (*c == "weibull") {
      cfg.family = Family::weibull;
    } else if (*c == "exponential") {
      cfg.family = Family::exponential;
    } else {
      p.errors.push_back("case: expected pareto|weibull|exponential, got '" +
                         *c + "'");
    }
  } else if (cfg.experiment != ExperimentKind::constants) {
    p.errors.push_back("missing key: case");
  }

  p.number("experiment.d", cfg.dim);
  p.number("experiment.alpha", cfg.alpha);
  p.number("experiment.gamma", cfg.gamma);
  p.number("experiment.samples", cfg.samples);
  p.number("experiment.master_seed", cfg.master_seed);
  p.number("experiment.epsilon", cfg.epsilon);
  p.number("experiment.threads", cfg.threads);
  p.number("experiment.tau", cfg.tau);
  p.number("experiment.bands", cfg.bands);
  p.number("experiment.x_window", cfg.x_window);
  p.number("experiment.box_radius", cfg.box_radius);
  p.number("experiment.ode_tol", cfg.ode_tol);
  p.number("experiment.r_lo", cfg.r_lo);
  p.number("experiment.r_hi", cfg.r_hi);
  p.number("experiment.rho", cfg.rho);
  p.number("experiment.c", cfg.c_lower);
  p.number("experiment.delta", cfg.delta);
  p.text("experiment.sandwich_mode", cfg.sandwich_mode);
  p.text("output.out_dir", cfg.out_dir);

  if (auto cen = p.take("experiment.centering")) {
    if (*cen == "compact") {
      cfg.centering = Centering::compact;
    } else if (*cen == "expanded") {
      cfg.centering = Centering::expanded;
    } else {
      p.errors.push_back("centering: expected compact|expanded, got '" + *cen +
                         "'");
    }
  }

  if (auto ts = p.take("experiment.t")) {
    cfg.t_grid = parse_t_list(*ts, p.errors);
  } else if (auto tg = p.take("experiment.t_grid")) {
    cfg.t_grid = parse_t_list(*tg, p.errors);
  }

  for (const auto& [key, entry] : p.entries) {
    p.errors.push_back("unknown key '" + key + "' (line " +
                       std::to_string(entry.line) + ")");
  }

  // domain validation
  const bool needs_field = cfg.experiment != ExperimentKind::constants;
  if (needs_field) {
    if (cfg.dim < 1 || cfg.dim > kMaxDim) {
      p.errors.push_back("d: must lie in [1, 8]");
    }
    if (cfg.family == Family::pareto) {
      if (cfg.alpha == 0.0) {
        p.errors.push_back("missing key: alpha (pareto case)");
      } else if (!(cfg.alpha > cfg.dim)) {
        p.errors.push_back(
            "alpha: pareto requires alpha > d (existence of the solution); "
            "got alpha = " + std::to_string(cfg.alpha) +
            ", d = " + std::to_string(cfg.dim));
      }
    }
    if (cfg.family == Family::weibull &&
        (!(cfg.gamma > 0.0) || cfg.gamma > 1.0)) {
      p.errors.push_back("gamma: weibull requires gamma in (0, 1]");
    }
    const bool needs_t = cfg.experiment == ExperimentKind::ensemble ||
                         cfg.experiment == ExperimentKind::trace ||
                         cfg.experiment == ExperimentKind::sandwich ||
                         cfg.experiment == ExperimentKind::gof;
    if (needs_t && cfg.t_grid.empty()) {
      p.errors.push_back("missing key: t (or t_grid)");
    }
    if (cfg.samples < 1) p.errors.push_back("samples: must be >= 1");
  }
  if (!(cfg.epsilon > 0.0) || cfg.epsilon > 0.5) {
    p.errors.push_back("epsilon: must lie in (0, 0.5]");
  }
  if (cfg.threads < 0) p.errors.push_back("threads: must be >= 0");
  if (cfg.experiment == ExperimentKind::sandwich &&
      cfg.sandwich_mode != "exact" && cfg.sandwich_mode != "asymptotic") {
    p.errors.push_back("sandwich_mode: expected exact|asymptotic");
  }
  if (cfg.experiment == ExperimentKind::gof && cfg.bands < 5) {
    p.errors.push_back("bands: need at least 5 for the chi-square test");
  }

  if (!p.errors.empty()) throw ConfigError(std::move(p.errors));
  return cfg;
}

std::uint64_t derive_sample_seed(std::uint64_t master_seed,
                                 std::uint64_t sample_index) {
  // (index+1) * odd constant is injective mod 2^64; the two finalizer
  // rounds of site_hash are bijective for fixed master, so distinct sample
  // indices always map to distinct seeds.
  return detail::site_hash(master_seed,
                           (sample_index + 1) * 0x9e3779b97f4a7c15ull);
}

}  // namespace pamlab
