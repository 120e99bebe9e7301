#pragma once

// Scenario configuration (TOML), validation, built-in presets and the runner
// that writes JSON reports, CSV tables and SVG charts.

#include <toml.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hadamard/asymptotic.hpp"
#include "hadamard/manifold.hpp"
#include "hadamard/pde.hpp"
#include "hadamard/young.hpp"
#include "json.hpp"

namespace hadamard {

enum class ExitCode : int { ok = 0, failure = 1, invalid_config = 2, not_converged = 3 };

struct ScenarioConfig {
  std::string name = "scenario";
  std::string mode = "exhaustion";  // exhaustion | young-selftest | jacobi-selftest
  bool strict = false;
  struct {
    std::string kind = "constant";  // euclidean | constant | power
    double a = 1.0;
    double phi = 2.0;
    double R0 = 1.0;
    std::string bridge = "none";  // none | c1_cubic
    double bridge_delta = 0.5;
    int n = 2;
  } manifold;
  struct {
    std::string preset = "cosine";  // cosine | step-smoothed | custom-samples
    double amplitude = 1.0;
    std::optional<double> L;
    std::vector<double> theta;
    std::vector<double> values;
  } boundary;
  struct {
    double eps0 = 0.5;
    double lambda = 1.25;
    std::optional<double> nu;
  } young;
  struct {
    int n_r = 32;
    int n_theta = 32;
  } grid;
  struct {
    std::vector<double> radii{4.0, 6.0, 8.0};
    std::vector<double> probes;
    std::vector<double> relative_probes{0.75};
    double compact_radius = 0.0;
  } exhaustion;
  struct {
    double tol = 1e-10;
    int max_iter = 50;
  } solver;
  struct {
    double caccioppoli_eps = 1.0;
    double sobolev_radius = 1.0;
    double moser_radius = 0.5;
    std::vector<double> moser_centers{2.0, 3.0, 4.0};
    double decay_C = 1.0;
    double decay_r_max = 1e6;
    double laplace_eps = 0.1;
  } checks;
  struct {
    std::string dir;
    std::vector<std::string> formats{"json", "csv", "svg"};
  } output;
};

struct ConfigIssue {
  std::string path;
  std::string message;
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<ConfigIssue> issues)
      : std::runtime_error(summary(issues)), issues_(std::move(issues)) {}
  const std::vector<ConfigIssue>& issues() const { return issues_; }

 private:
  static std::string summary(const std::vector<ConfigIssue>& issues) {
    std::string s;
    for (const auto& i : issues) s += i.path + ": " + i.message + "\n";
    return s;
  }
  std::vector<ConfigIssue> issues_;
};

namespace detail {

/// Reads typed values by dotted path and remembers which keys were consumed.
class TomlReader {
 public:
  TomlReader(const toml::table& root, std::vector<ConfigIssue>& issues) : root_(root), issues_(issues) {}

  void read(const std::string& path, double& out) {
    if (const auto* node = find(path)) {
      if (auto v = node->value<double>(); v && (node->is_floating_point() || node->is_integer()))
        out = *v;
      else
        issues_.push_back({path, "expected a number"});
    }
  }
  void read(const std::string& path, std::optional<double>& out) {
    if (find(path)) {
      double v = 0.0;
      read(path, v);
      out = v;
    }
  }
  void read(const std::string& path, int& out) {
    if (const auto* node = find(path)) {
      if (auto v = node->value_exact<int64_t>())
        out = static_cast<int>(*v);
      else
        issues_.push_back({path, "expected an integer"});
    }
  }
  void read(const std::string& path, bool& out) {
    if (const auto* node = find(path)) {
      if (auto v = node->value_exact<bool>())
        out = *v;
      else
        issues_.push_back({path, "expected true or false"});
    }
  }
  void read(const std::string& path, std::string& out) {
    if (const auto* node = find(path)) {
      if (auto v = node->value_exact<std::string>())
        out = *v;
      else
        issues_.push_back({path, "expected a string"});
    }
  }
  void read(const std::string& path, std::vector<double>& out) {
    if (const auto* node = find(path)) {
      const auto* arr = node->as_array();
      if (!arr) {
        issues_.push_back({path, "expected an array of numbers"});
        return;
      }
      out.clear();
      for (std::size_t k = 0; k < arr->size(); ++k) {
        const auto v = (*arr)[k].value<double>();
        if (!v || !((*arr)[k].is_floating_point() || (*arr)[k].is_integer())) {
          issues_.push_back({path + "[" + std::to_string(k) + "]", "expected a number"});
          return;
        }
        out.push_back(*v);
      }
    }
  }
  void read(const std::string& path, std::vector<std::string>& out) {
    if (const auto* node = find(path)) {
      const auto* arr = node->as_array();
      if (!arr) {
        issues_.push_back({path, "expected an array of strings"});
        return;
      }
      out.clear();
      for (std::size_t k = 0; k < arr->size(); ++k) {
        const auto v = (*arr)[k].value_exact<std::string>();
        if (!v) {
          issues_.push_back({path + "[" + std::to_string(k) + "]", "expected a string"});
          return;
        }
        out.push_back(*v);
      }
    }
  }

  void report_unknown() { walk(root_, ""); }

 private:
  const toml::node* find(const std::string& path) {
    used_.insert(path);
    return root_.at_path(path).node();
  }
  void walk(const toml::table& t, const std::string& prefix) {
    for (const auto& [key, node] : t) {
      const std::string path = prefix.empty() ? std::string(key.str()) : prefix + "." + std::string(key.str());
      if (const auto* sub = node.as_table())
        walk(*sub, path);
      else if (!used_.count(path))
        issues_.push_back({path, "unknown key"});
    }
  }

  const toml::table& root_;
  std::vector<ConfigIssue>& issues_;
  std::set<std::string> used_;
};

}  // namespace detail

/// Parses TOML text into a config; unknown keys and type mismatches are
/// errors.
inline ScenarioConfig parse_config(std::string_view text, const std::string& source = "config") {
  toml::table root;
  try {
    root = toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << e.description() << " (line " << e.source().begin.line << ")";
    throw ConfigError({{source, os.str()}});
  }
  ScenarioConfig c;
  std::vector<ConfigIssue> issues;
  detail::TomlReader r(root, issues);
  r.read("name", c.name);
  r.read("mode", c.mode);
  r.read("strict", c.strict);
  r.read("manifold.kind", c.manifold.kind);
  r.read("manifold.a", c.manifold.a);
  r.read("manifold.phi", c.manifold.phi);
  r.read("manifold.R0", c.manifold.R0);
  r.read("manifold.bridge", c.manifold.bridge);
  r.read("manifold.bridge_delta", c.manifold.bridge_delta);
  r.read("manifold.n", c.manifold.n);
  r.read("boundary.preset", c.boundary.preset);
  r.read("boundary.amplitude", c.boundary.amplitude);
  r.read("boundary.L", c.boundary.L);
  r.read("boundary.theta", c.boundary.theta);
  r.read("boundary.values", c.boundary.values);
  r.read("young.eps0", c.young.eps0);
  r.read("young.lambda", c.young.lambda);
  r.read("young.nu", c.young.nu);
  r.read("grid.n_r", c.grid.n_r);
  r.read("grid.n_theta", c.grid.n_theta);
  r.read("exhaustion.radii", c.exhaustion.radii);
  r.read("exhaustion.probes", c.exhaustion.probes);
  r.read("exhaustion.relative_probes", c.exhaustion.relative_probes);
  r.read("exhaustion.compact_radius", c.exhaustion.compact_radius);
  r.read("solver.tol", c.solver.tol);
  r.read("solver.max_iter", c.solver.max_iter);
  r.read("checks.caccioppoli.eps", c.checks.caccioppoli_eps);
  r.read("checks.moser.sobolev_radius", c.checks.sobolev_radius);
  r.read("checks.moser.radius", c.checks.moser_radius);
  r.read("checks.moser.centers", c.checks.moser_centers);
  r.read("checks.decay.C", c.checks.decay_C);
  r.read("checks.decay.r_max", c.checks.decay_r_max);
  r.read("checks.laplace.eps", c.checks.laplace_eps);
  r.read("output.dir", c.output.dir);
  r.read("output.formats", c.output.formats);
  r.report_unknown();
  if (!issues.empty()) throw ConfigError(std::move(issues));
  return c;
}

inline ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({{path, "cannot open file"}});
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

inline CurvatureProfile make_profile(const ScenarioConfig& c) {
  const auto& m = c.manifold;
  if (m.kind == "euclidean") return CurvatureProfile::euclidean();
  if (m.kind == "constant") return CurvatureProfile::constant(m.a);
  return CurvatureProfile::power(m.phi, m.R0, m.bridge == "c1_cubic" ? BridgeKind::c1_cubic : BridgeKind::none,
                                 m.bridge == "c1_cubic" ? m.bridge_delta : 0.0);
}

inline BoundaryData make_boundary(const ScenarioConfig& c) {
  const auto& b = c.boundary;
  if (b.preset == "cosine") return BoundaryData::cosine(b.amplitude);
  if (b.preset == "step-smoothed") {
    const double L = b.L.value_or(4.0 * std::abs(b.amplitude));
    return BoundaryData::smoothed_step(b.amplitude, std::abs(b.amplitude) / L);
  }
  return BoundaryData::samples(b.theta, b.values);
}

/// Curvature hypothesis: K <= -phi (phi - 1) / r^2 outside a compact set.
inline bool curvature_bound_met(const ScenarioConfig& c) {
  if (c.manifold.kind == "euclidean") return false;
  if (c.manifold.kind == "constant") return c.manifold.a > 0.0;
  return true;
}

/// The exponent phi entering the dimension gate. Constant negative curvature
/// satisfies the curvature bound for every phi; the smallest one passing the
/// gate, 4 / (n - 1) + 1, is used.
inline double gate_phi(const ScenarioConfig& c) {
  if (c.manifold.kind == "power") return c.manifold.phi;
  return 4.0 / (c.manifold.n - 1) + 1.0;
}

inline HypothesisFlags hypothesis_flags(const ScenarioConfig& c) {
  HypothesisFlags f;
  f.curvature_bound = curvature_bound_met(c);
  f.dimension_gate = f.curvature_bound && dimension_gate(c.manifold.n, gate_phi(c));
  return f;
}

inline std::vector<ProbeSpec> probe_specs(const ScenarioConfig& c) {
  std::vector<ProbeSpec> out;
  for (double p : c.exhaustion.probes) out.push_back({p, false});
  for (double p : c.exhaustion.relative_probes) out.push_back({p, true});
  return out;
}

/// Domain checks, strict-mode gates and default resolution (including nu).
/// Throws ConfigError listing every violation.
inline ScenarioConfig validate(ScenarioConfig c) {
  std::vector<ConfigIssue> bad;
  auto require = [&](bool ok, const std::string& path, const std::string& msg) {
    if (!ok) bad.push_back({path, msg});
  };
  auto positive = [&](double v, const std::string& path) { require(v > 0.0 && std::isfinite(v), path, "must be positive"); };

  require(c.mode == "exhaustion" || c.mode == "young-selftest" || c.mode == "jacobi-selftest", "mode",
          "must be exhaustion, young-selftest or jacobi-selftest");
  require(!c.name.empty() && c.name.find_first_of("/\\") == std::string::npos, "name",
          "must be a non-empty file name");
  const auto& m = c.manifold;
  require(m.kind == "euclidean" || m.kind == "constant" || m.kind == "power", "manifold.kind",
          "must be euclidean, constant or power");
  require(m.n >= 2, "manifold.n", "dimension must be >= 2");
  if (m.kind == "constant") require(m.a >= 0.0 && std::isfinite(m.a), "manifold.a", "must be >= 0");
  if (m.kind == "power") {
    require(m.phi > 1.0, "manifold.phi", "must exceed 1");
    positive(m.R0, "manifold.R0");
    require(m.bridge == "none" || m.bridge == "c1_cubic", "manifold.bridge", "must be none or c1_cubic");
    if (m.bridge == "c1_cubic")
      require(m.bridge_delta > 0.0 && m.bridge_delta < m.R0, "manifold.bridge_delta", "must lie in (0, R0)");
  }

  const auto& y = c.young;
  require(y.eps0 > 0.0 && y.eps0 < 1.0, "young.eps0", "must lie in (0, 1)");
  require(y.lambda > 1.0 && y.lambda < 1.0 + y.eps0, "young.lambda",
          "must lie in (1, 1 + eps0) = (1, " + format_number(1.0 + y.eps0) + ")");
  if (y.nu) positive(*y.nu, "young.nu");

  const auto& b = c.boundary;
  require(b.preset == "cosine" || b.preset == "step-smoothed" || b.preset == "custom-samples", "boundary.preset",
          "must be cosine, step-smoothed or custom-samples");
  require(std::isfinite(b.amplitude), "boundary.amplitude", "must be finite");
  if (b.L) positive(*b.L, "boundary.L");
  if (b.preset == "custom-samples") {
    require(b.theta.size() >= 2 && b.theta.size() == b.values.size(), "boundary.values",
            "need matching theta and values arrays with at least two entries");
  } else {
    require(b.theta.empty() && b.values.empty(), "boundary.theta", "only used by custom-samples");
  }

  require(c.grid.n_r >= 4, "grid.n_r", "must be >= 4");
  require(c.grid.n_theta >= 4, "grid.n_theta", "must be >= 4");
  positive(c.solver.tol, "solver.tol");
  require(c.solver.max_iter >= 1, "solver.max_iter", "must be >= 1");

  const auto& e = c.exhaustion;
  require(!e.radii.empty(), "exhaustion.radii", "must not be empty");
  for (std::size_t k = 0; k < e.radii.size(); ++k) {
    positive(e.radii[k], "exhaustion.radii[" + std::to_string(k) + "]");
    if (k > 0) require(e.radii[k] > e.radii[k - 1], "exhaustion.radii", "must be strictly increasing");
  }
  for (std::size_t k = 0; k < e.probes.size(); ++k) {
    positive(e.probes[k], "exhaustion.probes[" + std::to_string(k) + "]");
    if (!e.radii.empty())
      require(e.probes[k] <= e.radii.front(), "exhaustion.probes[" + std::to_string(k) + "]",
              "must not exceed the first radius");
  }
  for (std::size_t k = 0; k < e.relative_probes.size(); ++k)
    require(e.relative_probes[k] > 0.0 && e.relative_probes[k] <= 1.0,
            "exhaustion.relative_probes[" + std::to_string(k) + "]", "must lie in (0, 1]");
  require(e.compact_radius >= 0.0, "exhaustion.compact_radius", "must be >= 0");
  if (c.mode == "exhaustion")
    require(!e.probes.empty() || !e.relative_probes.empty(), "exhaustion.probes", "need at least one probe");

  const auto& k = c.checks;
  positive(k.caccioppoli_eps, "checks.caccioppoli.eps");
  positive(k.sobolev_radius, "checks.moser.sobolev_radius");
  require(k.moser_radius > 0.0 && k.moser_radius < k.sobolev_radius, "checks.moser.radius",
          "must lie in (0, sobolev_radius)");
  for (std::size_t i = 0; i < k.moser_centers.size(); ++i)
    positive(k.moser_centers[i], "checks.moser.centers[" + std::to_string(i) + "]");
  positive(k.decay_C, "checks.decay.C");
  require(k.decay_r_max > 1.0, "checks.decay.r_max", "must exceed 1");
  positive(k.laplace_eps, "checks.laplace.eps");

  for (const auto& f : c.output.formats)
    require(f == "json" || f == "csv" || f == "svg", "output.formats", "unknown format '" + f + "'");
  if (c.output.dir.empty()) c.output.dir = "out/" + c.name;

  if (bad.empty() && c.strict && c.mode == "exhaustion") {
    if (!curvature_bound_met(c)) {
      bad.push_back({"manifold.kind", "strict mode needs curvature bounded above by -phi(phi-1)/r^2"});
    } else {
      const double phi = gate_phi(c);
      if (!dimension_gate(m.n, phi))
        bad.push_back({"manifold.n", "strict mode needs n > 4/phi + 1 = " + format_number(4.0 / phi + 1.0) +
                                         ", got n = " + std::to_string(m.n)});
      else {
        const auto jac = solve_jacobi(make_profile(c), m.n, std::max(2.0 * e.radii.back(), 20.0));
        const auto lb = verify_laplacian_bound(jac, phi, k.laplace_eps);
        if (e.radii.front() < lb.R1)
          bad.push_back({"exhaustion.radii", "strict mode needs every radius >= R1 = " + format_number(lb.R1)});
      }
    }
  }
  if (bad.empty()) {
    try {
      (void)make_boundary(c);
    } catch (const std::invalid_argument& ex) {
      bad.push_back({"boundary", ex.what()});
    }
  }
  if (!bad.empty()) throw ConfigError(std::move(bad));

  if (c.mode == "exhaustion" && !c.young.nu) {
    const auto phi = build_phi(young_from_density(build_density(y.eps0, y.lambda)));
    c.young.nu = select_nu(phi, make_boundary(c).bound());
  }
  return c;
}

inline nlohmann::ordered_json config_json(const ScenarioConfig& c) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr); };
  nlohmann::ordered_json j;
  j["name"] = c.name;
  j["mode"] = c.mode;
  j["strict"] = c.strict;
  j["manifold"] = {{"kind", c.manifold.kind}, {"a", c.manifold.a},          {"phi", c.manifold.phi},
                   {"R0", c.manifold.R0},     {"bridge", c.manifold.bridge}, {"bridge_delta", c.manifold.bridge_delta},
                   {"n", c.manifold.n}};
  j["boundary"] = {{"preset", c.boundary.preset}, {"amplitude", c.boundary.amplitude}, {"L", opt(c.boundary.L)},
                   {"theta", c.boundary.theta},   {"values", c.boundary.values}};
  j["young"] = {{"eps0", c.young.eps0}, {"lambda", c.young.lambda}, {"nu", opt(c.young.nu)}};
  j["grid"] = {{"n_r", c.grid.n_r}, {"n_theta", c.grid.n_theta}};
  j["exhaustion"] = {{"radii", c.exhaustion.radii},
                     {"probes", c.exhaustion.probes},
                     {"relative_probes", c.exhaustion.relative_probes},
                     {"compact_radius", c.exhaustion.compact_radius}};
  j["solver"] = {{"tol", c.solver.tol}, {"max_iter", c.solver.max_iter}};
  j["checks"] = {{"caccioppoli", {{"eps", c.checks.caccioppoli_eps}}},
                 {"moser",
                  {{"sobolev_radius", c.checks.sobolev_radius},
                   {"radius", c.checks.moser_radius},
                   {"centers", c.checks.moser_centers}}},
                 {"decay", {{"C", c.checks.decay_C}, {"r_max", c.checks.decay_r_max}}},
                 {"laplace", {{"eps", c.checks.laplace_eps}}}};
  j["output"] = {{"dir", c.output.dir}, {"formats", c.output.formats}};
  return j;
}

// ---------------------------------------------------------------------------
// Presets

inline const std::map<std::string, std::string>& preset_sources() {
  static const std::map<std::string, std::string> presets = {
      {"hyperbolic-cosine", R"(name = "hyperbolic-cosine"
strict = true

[manifold]
kind = "constant"
a = 1.0
n = 2

[boundary]
preset = "cosine"
amplitude = 1.0

[grid]
n_r = 48
n_theta = 32

[exhaustion]
radii = [4.0, 6.0, 8.0]
probes = [3.0]
relative_probes = [0.75]

[checks.laplace]
eps = 0.5

[checks.decay]
r_max = 200.0
)"},
      {"power2-n3-cosine", R"(name = "power2-n3-cosine"

[manifold]
kind = "power"
phi = 2.0
R0 = 1.0
n = 3

[boundary]
preset = "cosine"
amplitude = 1.0

[grid]
n_r = 32
n_theta = 24

[exhaustion]
radii = [4.0, 6.0, 8.0]
probes = [3.0]
relative_probes = [0.75]

[checks.decay]
C = 1.0
r_max = 1e6
)"},
      {"power5-n2-cosine", R"(name = "power5-n2-cosine"
strict = true

[manifold]
kind = "power"
phi = 5.0
R0 = 1.0
n = 2

[boundary]
preset = "cosine"
amplitude = 1.0

[grid]
n_r = 48
n_theta = 32

[exhaustion]
radii = [4.0, 6.0, 8.0]
probes = [3.0]
relative_probes = [0.75]

[checks.laplace]
eps = 0.5

[checks.decay]
r_max = 1e6
)"},
      {"euclidean-contrast", R"(name = "euclidean-contrast"

[manifold]
kind = "euclidean"
n = 2

[boundary]
preset = "cosine"
amplitude = 1.0

[grid]
n_r = 32
n_theta = 32

[exhaustion]
radii = [4.0, 8.0, 16.0]
relative_probes = [0.75]

[checks.decay]
r_max = 1e6
)"},
      {"young-selftest", R"(name = "young-selftest"
mode = "young-selftest"

[young]
eps0 = 0.5
lambda = 1.25
)"},
      {"jacobi-selftest", R"(name = "jacobi-selftest"
mode = "jacobi-selftest"
)"},
  };
  return presets;
}

inline std::vector<std::string> preset_names() {
  std::vector<std::string> out;
  for (const auto& [k, v] : preset_sources()) out.push_back(k);
  return out;
}

inline ScenarioConfig preset_config(const std::string& name) {
  const auto& p = preset_sources();
  const auto it = p.find(name);
  if (it == p.end()) throw ConfigError({{"preset", "unknown preset '" + name + "'"}});
  return parse_config(it->second, "preset:" + name);
}

// ---------------------------------------------------------------------------
// SVG line charts

struct ChartSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

inline void write_svg_chart(std::ostream& os, const std::string& title, const std::string& x_label,
                            const std::string& y_label, const std::vector<ChartSeries>& series, bool log_y = false) {
  constexpr double W = 640, H = 420, left = 70, right = 160, top = 40, bottom = 50;
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"};
  auto ty = [&](double v) { return log_y ? std::log10(v) : v; };
  auto usable = [&](double x, double y) { return std::isfinite(x) && std::isfinite(y) && (!log_y || y > 0.0); };
  double x0 = kInf, x1 = -kInf, y0 = kInf, y1 = -kInf;
  for (const auto& s : series)
    for (std::size_t k = 0; k < s.x.size(); ++k) {
      if (!usable(s.x[k], s.y[k])) continue;
      x0 = std::min(x0, s.x[k]);
      x1 = std::max(x1, s.x[k]);
      y0 = std::min(y0, ty(s.y[k]));
      y1 = std::max(y1, ty(s.y[k]));
    }
  if (!(x0 <= x1)) x0 = 0.0, x1 = 1.0;
  if (!(y0 <= y1)) y0 = 0.0, y1 = 1.0;
  if (x1 == x0) x0 -= 0.5, x1 += 0.5;
  if (y1 == y0) y0 -= 0.5, y1 += 0.5;
  const double pw = W - left - right, ph = H - top - bottom;
  auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return top + ph - (ty(y) - y0) / (y1 - y0) * ph; };
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return std::string(buf);
  };
  auto esc = [](const std::string& s) {
    std::string o;
    for (char ch : s) {
      if (ch == '<') o += "&lt;";
      else if (ch == '>') o += "&gt;";
      else if (ch == '&') o += "&amp;";
      else o += ch;
    }
    return o;
  };
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << esc(title) << "</text>\n";
  os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double xv = x0 + (x1 - x0) * t / 4.0;
    const double yv = y0 + (y1 - y0) * t / 4.0;
    const double X = left + pw * t / 4.0;
    const double Y = top + ph - ph * t / 4.0;
    os << "<line x1=\"" << num(X) << "\" y1=\"" << top + ph << "\" x2=\"" << num(X) << "\" y2=\"" << top + ph + 5
       << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << num(X) << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">" << num(xv)
       << "</text>\n";
    os << "<line x1=\"" << left - 5 << "\" y1=\"" << num(Y) << "\" x2=\"" << left << "\" y2=\"" << num(Y)
       << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << left - 8 << "\" y=\"" << num(Y + 4) << "\" text-anchor=\"end\">"
       << (log_y ? "1e" + num(yv) : num(yv)) << "</text>\n";
  }
  os << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">" << esc(x_label)
     << "</text>\n";
  os << "<text x=\"16\" y=\"" << top + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
     << top + ph / 2 << ")\">" << esc(y_label) << "</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = colors[s % 6];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t k = 0; k < series[s].x.size(); ++k)
      if (usable(series[s].x[k], series[s].y[k]))
        os << num(px(series[s].x[k])) << ',' << num(py(series[s].y[k])) << ' ';
    os << "\"/>\n";
    for (std::size_t k = 0; k < series[s].x.size(); ++k)
      if (usable(series[s].x[k], series[s].y[k]))
        os << "<circle cx=\"" << num(px(series[s].x[k])) << "\" cy=\"" << num(py(series[s].y[k]))
           << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    const double ly = top + 10 + 20.0 * s;
    os << "<line x1=\"" << W - right + 15 << "\" y1=\"" << ly << "\" x2=\"" << W - right + 40 << "\" y2=\"" << ly
       << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << W - right + 46 << "\" y=\"" << ly + 4 << "\">" << esc(series[s].name) << "</text>\n";
  }
  os << "</svg>\n";
}

// ---------------------------------------------------------------------------
// Self tests

struct CheckLine {
  std::string name;
  bool pass = false;
  std::string detail;
};

inline nlohmann::ordered_json checks_json(const std::vector<CheckLine>& checks) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& c : checks) arr.push_back({{"check", c.name}, {"pass", c.pass}, {"detail", c.detail}});
  return arr;
}

struct YoungSelftest {
  std::vector<CheckLine> checks;
  std::vector<double> trend_t;
  std::vector<double> curvature_ratio;
  std::vector<double> g1_ratio;
  double fitted_c_F1 = kNaN;
};

inline YoungSelftest young_selftest(const PhiFunction& phi, const YoungPair<SquaredDensity<BridgeDensity>>& g1) {
  YoungSelftest out;
  const auto& pair = phi.pair();
  const double eps0 = phi.density().eps0();
  const double lambda = phi.density().lambda();
  char buf[160];

  std::mt19937_64 rng(20240601);
  std::uniform_real_distribution<double> u(std::log(1e-3), std::log(1e2));
  auto margins = [&](const auto& p) {
    double worst = kInf;
    for (int i = 0; i < 1000; ++i) {
      const double a = std::exp(u(rng));
      const double b = std::exp(u(rng));
      const double ga = p.G(a), fb = p.F(b);
      worst = std::min(worst, (ga + fb - a * b) / (ga + fb));
    }
    return worst;
  };
  const double m1 = margins(pair);
  const double m2 = margins(g1);
  std::snprintf(buf, sizeof buf, "min relative margin G,F = %.3e; G1,F1 = %.3e", m1, m2);
  out.checks.push_back({"young-inequality", m1 >= -1e-9 && m2 >= -1e-9, buf});

  double worst = 0.0;
  for (double t : geometric_grid(1e-3, 1.0, 8)) worst = std::max(worst, std::abs(phi_identity_error(phi, t)));
  std::snprintf(buf, sizeof buf, "max |G(phi')/phi - 1| on [1e-3, 1] = %.3e", worst);
  out.checks.push_back({"phi-identity", worst <= 1e-6, buf});

  const auto ts = geometric_grid(1e-6, 1e-2, 5);
  double f_gap = -kInf;
  for (double t : ts) f_gap = std::max(f_gap, pair.log_F(t) - log_F_bound(eps0, t));
  std::snprintf(buf, sizeof buf, "max log(F / bound) on [1e-6, 1e-2] = %.3e", f_gap);
  out.checks.push_back({"F-bound", f_gap <= 0.0, buf});

  out.fitted_c_F1 = fit_F1_constant(g1, ts);
  double f1_gap = -kInf;
  for (double t : ts) f1_gap = std::max(f1_gap, g1.log_F(t) - std::log(out.fitted_c_F1) - log_F1_bound(lambda, t));
  std::snprintf(buf, sizeof buf, "fitted c = %.6g, max log(F1 / c bound) = %.3e", out.fitted_c_F1, f1_gap);
  out.checks.push_back({"F1-bound", std::isfinite(out.fitted_c_F1) && f1_gap <= 1e-12, buf});

  out.trend_t = {3.0, 2.5, 2.0};
  bool mono_c = true, mono_g = true;
  for (double t : out.trend_t) {
    out.curvature_ratio.push_back(phi_curvature_ratio(phi, t));
    out.g1_ratio.push_back(g1_phi_ratio(g1, phi, t));
  }
  for (std::size_t k = 1; k < out.trend_t.size(); ++k) {
    mono_c = mono_c && std::abs(out.curvature_ratio[k] - 1.0) < std::abs(out.curvature_ratio[k - 1] - 1.0);
    mono_g = mono_g && std::abs(out.g1_ratio[k] - 1.0) < std::abs(out.g1_ratio[k - 1] - 1.0);
  }
  std::snprintf(buf, sizeof buf, "phi''phi/phi'^2 at t=3,2.5,2: %.6f %.6f %.6f", out.curvature_ratio[0],
                out.curvature_ratio[1], out.curvature_ratio[2]);
  out.checks.push_back({"phi-curvature-trend", mono_c, buf});
  std::snprintf(buf, sizeof buf, "G1(phi'')/phi at t=3,2.5,2: %.6f %.6f %.6f", out.g1_ratio[0], out.g1_ratio[1],
                out.g1_ratio[2]);
  out.checks.push_back({"G1-phi-trend", mono_g, buf});

  const double w1 = lambert_w(1.0);
  std::snprintf(buf, sizeof buf, "W(1) = %.12f", w1);
  out.checks.push_back({"lambert-w", std::abs(w1 - 0.5671432904) <= 1e-9, buf});
  return out;
}

/// f for the power profile with k = 0 on [0, R0]: A r^phi + B r^(1-phi) beyond R0.
inline double power_profile_closed_form(double phi, double R0, double r) {
  if (r <= R0) return r;
  const double A = phi / (2.0 * phi - 1.0) * std::pow(R0, 1.0 - phi);
  const double B = (phi - 1.0) / (2.0 * phi - 1.0) * std::pow(R0, phi);
  return A * std::pow(r, phi) + B * std::pow(r, 1.0 - phi);
}

struct JacobiSelftest {
  std::vector<CheckLine> checks;
  std::vector<double> r;
  std::vector<double> sinh_rel_error;
  std::vector<double> power_rel_error;
};

inline JacobiSelftest jacobi_selftest() {
  JacobiSelftest out;
  char buf[160];
  const auto hyp = solve_jacobi(CurvatureProfile::constant(1.0), 2, 10.0);
  const auto pw = solve_jacobi(CurvatureProfile::power(2.0, 1.0), 3, 10.0);
  double e_sinh = 0.0, e_pow = 0.0;
  for (int k = 1; k <= 200; ++k) {
    const double r = 10.0 * k / 200.0;
    out.r.push_back(r);
    out.sinh_rel_error.push_back(std::abs(hyp.f(r) / std::sinh(r) - 1.0));
    e_sinh = std::max(e_sinh, out.sinh_rel_error.back());
    const double e = r >= 1.0 ? std::abs(pw.f(r) / power_profile_closed_form(2.0, 1.0, r) - 1.0) : kNaN;
    out.power_rel_error.push_back(e);
    if (r >= 1.0) e_pow = std::max(e_pow, e);
  }
  std::snprintf(buf, sizeof buf, "max relative error vs sinh on (0, 10] = %.3e", e_sinh);
  out.checks.push_back({"jacobi-sinh", e_sinh <= 1e-8, buf});
  std::snprintf(buf, sizeof buf, "max relative error vs (2/3)r^2 + (1/3)/r on [1, 10] = %.3e", e_pow);
  out.checks.push_back({"jacobi-power2", e_pow <= 1e-7, buf});

  struct Case {
    const char* name;
    CurvatureProfile profile;
    int n;
    double phi;
  };
  const Case cases[] = {{"constant a=1, n=2", CurvatureProfile::constant(1.0), 2, 5.0},
                        {"constant a=1, n=3", CurvatureProfile::constant(1.0), 3, 3.0},
                        {"power phi=2, n=3", CurvatureProfile::power(2.0, 1.0), 3, 2.0},
                        {"power phi=5, n=2", CurvatureProfile::power(5.0, 1.0), 2, 5.0},
                        {"power phi=2 bridged, n=3",
                         CurvatureProfile::power(2.0, 1.0, BridgeKind::c1_cubic, 0.5), 3, 2.0}};
  for (const auto& c : cases) {
    const auto jac = solve_jacobi(c.profile, c.n, 60.0);
    const auto lb = verify_laplacian_bound(jac, c.phi, 0.1);
    std::snprintf(buf, sizeof buf, "%s: min(r Lap r - (n-1)) = %.3e, R1(eps=0.1) = %.6g", c.name,
                  lb.min_base_margin, lb.R1);
    out.checks.push_back({"laplacian-bound", lb.base_bound_holds && std::isfinite(lb.R1), buf});
  }
  const auto flat = solve_jacobi(CurvatureProfile::euclidean(), 3, 60.0);
  const auto lb = verify_laplacian_bound(flat, 2.0, 0.1);
  std::snprintf(buf, sizeof buf, "euclidean, n=3: min(r Lap r - (n-1)) = %.3e", lb.min_base_margin);
  out.checks.push_back({"laplacian-bound", lb.base_bound_holds, buf});
  return out;
}

// ---------------------------------------------------------------------------
// Runner

inline ExhaustionOptions exhaustion_options(const ScenarioConfig& c) {
  ExhaustionOptions eo;
  eo.n_r = c.grid.n_r;
  eo.n_theta = c.grid.n_theta;
  eo.solver.tol = c.solver.tol;
  eo.solver.max_iter = c.solver.max_iter;
  eo.caccioppoli_eps = c.checks.caccioppoli_eps;
  eo.sobolev_radius = c.checks.sobolev_radius;
  eo.moser_radius = c.checks.moser_radius;
  eo.moser_centers = c.checks.moser_centers;
  eo.decay_C = c.checks.decay_C;
  eo.compact_radius = c.exhaustion.compact_radius;
  return eo;
}

/// The exhaustion stage of a validated config.
inline ExhaustionReport run_config_exhaustion(const ScenarioConfig& c, const PhiFunction& phi) {
  if (!c.young.nu) throw std::invalid_argument("run_config_exhaustion: config not validated");
  const auto jac = solve_jacobi(make_profile(c), c.manifold.n, c.exhaustion.radii.back());
  return run_exhaustion(jac, make_boundary(c), c.exhaustion.radii, probe_specs(c), exhaustion_options(c), phi,
                        *c.young.nu);
}

struct RunResult {
  ExitCode code = ExitCode::ok;
  std::filesystem::path output_dir;
  std::vector<std::filesystem::path> files;
  std::string verdict;
  std::vector<CheckLine> checks;
};

struct RunOptions {
  std::optional<std::filesystem::path> output_dir;
  bool timing = false;
};

/// --out, else $HADAMARD_OUTPUT_ROOT/<name>, else output.dir.
inline std::filesystem::path resolve_output_dir(const ScenarioConfig& c, const RunOptions& opt) {
  if (opt.output_dir) return *opt.output_dir;
  if (const char* root = std::getenv("HADAMARD_OUTPUT_ROOT"); root && *root)
    return std::filesystem::path(root) / c.name;
  return c.output.dir;
}

namespace detail {

class BundleWriter {
 public:
  BundleWriter(std::filesystem::path dir, const std::vector<std::string>& formats, RunResult& result)
      : dir_(std::move(dir)), formats_(formats.begin(), formats.end()), result_(result) {
    std::filesystem::create_directories(dir_);
  }
  bool wants(const std::string& format) const { return formats_.count(format) > 0; }

  template <class Fn>
  void write(const std::string& file, const std::string& format, Fn&& fn) {
    if (!wants(format)) return;
    const auto path = dir_ / file;
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    fn(os);
    if (!os) throw std::runtime_error("write failed for " + path.string());
    result_.files.push_back(path);
  }

 private:
  std::filesystem::path dir_;
  std::set<std::string> formats_;
  RunResult& result_;
};

inline std::string dump(const nlohmann::ordered_json& j) { return j.dump(2) + "\n"; }

}  // namespace detail

inline RunResult run_scenario(const ScenarioConfig& raw, const RunOptions& opt = {}) {
  const ScenarioConfig c = validate(raw);
  RunResult result;
  result.output_dir = resolve_output_dir(c, opt);
  detail::BundleWriter out(result.output_dir, c.output.formats, result);

  if (c.mode == "young-selftest") {
    const auto h = build_density(c.young.eps0, c.young.lambda);
    const auto phi = build_phi(young_from_density(h));
    const auto g1 = build_G1_F1(h);
    const auto st = young_selftest(phi, g1);
    result.checks = st.checks;
    nlohmann::ordered_json j;
    j["scenario"] = c.name;
    j["config"] = config_json(c);
    j["checks"] = checks_json(st.checks);
    j["fitted_c_F1"] = st.fitted_c_F1;
    j["trend"] = {{"t", st.trend_t}, {"phi_curvature_ratio", st.curvature_ratio}, {"g1_phi_ratio", st.g1_ratio}};
    out.write("young.json", "json", [&](std::ostream& os) { os << detail::dump(j); });
    out.write("young.csv", "csv",
              [&](std::ostream& os) { write_young_csv(os, phi, geometric_grid(1e-3, 10.0, 10)); });
    out.write("young_trends.svg", "svg", [&](std::ostream& os) {
      write_svg_chart(os, "Young ratio trends", "t", "ratio",
                      {{"phi'' phi / phi'^2", st.trend_t, st.curvature_ratio},
                       {"G1(phi'') / phi", st.trend_t, st.g1_ratio}});
    });
    const bool ok = std::all_of(st.checks.begin(), st.checks.end(), [](const CheckLine& l) { return l.pass; });
    result.code = ok ? ExitCode::ok : ExitCode::failure;
    return result;
  }

  if (c.mode == "jacobi-selftest") {
    const auto st = jacobi_selftest();
    result.checks = st.checks;
    nlohmann::ordered_json j;
    j["scenario"] = c.name;
    j["config"] = config_json(c);
    j["checks"] = checks_json(st.checks);
    out.write("jacobi.json", "json", [&](std::ostream& os) { os << detail::dump(j); });
    out.write("jacobi.csv", "csv", [&](std::ostream& os) {
      os << "r,sinh_rel_error,power2_rel_error\n";
      for (std::size_t k = 0; k < st.r.size(); ++k)
        os << format_number(st.r[k]) << ',' << format_number(st.sinh_rel_error[k]) << ','
           << format_number(st.power_rel_error[k]) << '\n';
    });
    out.write("jacobi.svg", "svg", [&](std::ostream& os) {
      std::vector<double> s1, s2;
      for (std::size_t k = 0; k < st.r.size(); ++k) {
        s1.push_back(std::max(st.sinh_rel_error[k], 1e-17));
        s2.push_back(std::isfinite(st.power_rel_error[k]) ? std::max(st.power_rel_error[k], 1e-17) : kNaN);
      }
      write_svg_chart(os, "Jacobi solutions against closed forms", "r", "relative error",
                      {{"sinh r", st.r, s1}, {"(2/3)r^2+(1/3)/r", st.r, s2}}, true);
    });
    const bool ok = std::all_of(st.checks.begin(), st.checks.end(), [](const CheckLine& l) { return l.pass; });
    result.code = ok ? ExitCode::ok : ExitCode::failure;
    return result;
  }

  // Exhaustion.
  const int n = c.manifold.n;
  const auto profile = make_profile(c);
  const auto h = build_density(c.young.eps0, c.young.lambda);
  const auto phi = build_phi(young_from_density(h));
  const auto g1 = build_G1_F1(h);
  const auto report = run_config_exhaustion(c, phi);
  const auto gates = hypothesis_flags(c);
  const auto verdict = classify(report, gates);
  result.verdict = verdict.verdict;

  nlohmann::ordered_json hyp;
  hyp["curvature_bound"] = gates.curvature_bound;
  hyp["dimension_gate"] = gates.dimension_gate;
  hyp["gate_phi"] = gate_phi(c);
  {
    const auto lj = solve_jacobi(profile, n, std::max(2.0 * c.exhaustion.radii.back(), 20.0));
    const auto lb = verify_laplacian_bound(lj, gate_phi(c), c.checks.laplace_eps);
    hyp["laplace"] = {{"eps", c.checks.laplace_eps},
                      {"threshold", lb.threshold},
                      {"R1", std::isfinite(lb.R1) ? nlohmann::ordered_json(lb.R1) : nlohmann::ordered_json(nullptr)},
                      {"base_bound_holds", lb.base_bound_holds},
                      {"radii_above_R1", c.exhaustion.radii.front() >= lb.R1}};
  }
  {
    double r_hi = c.checks.decay_r_max;
    if (c.manifold.kind == "constant" && c.manifold.a > 0.0) r_hi = std::min(r_hi, 200.0 / c.manifold.a);
    nlohmann::ordered_json d;
    d["C"] = c.checks.decay_C;
    d["r_scan"] = {1.0, r_hi};
    try {
      const auto dj = solve_jacobi(profile, n, r_hi);
      d["r_star"] = decay_check(phi.pair(), g1, dj, c.checks.decay_C, 1.0, r_hi);
    } catch (const HypothesisViolation& ex) {
      d["r_star"] = nullptr;
      d["failure"] = ex.what();
    }
    hyp["decay"] = d;
  }

  nlohmann::ordered_json j;
  j["scenario"] = c.name;
  j["config"] = config_json(c);
  j["hypotheses"] = hyp;
  j["exhaustion"] = exhaustion_json(report, verdict, opt.timing);
  out.write("report.json", "json", [&](std::ostream& os) { os << detail::dump(j); });
  out.write("attainment.csv", "csv", [&](std::ostream& os) { write_attainment_csv(os, report); });
  out.write("attainment.svg", "svg", [&](std::ostream& os) {
    std::vector<ChartSeries> series;
    for (std::size_t p = 0; p < report.probes.size(); ++p) {
      ChartSeries s{"rho = " + report.probes[p].label(), {}, {}};
      for (const auto& rec : report.records) {
        s.x.push_back(rec.R);
        s.y.push_back(rec.delta[p]);
      }
      series.push_back(std::move(s));
    }
    write_svg_chart(os, c.name + ": attainment", "R", "delta(R; rho)", series);
  });
  result.code = report.all_converged() ? ExitCode::ok : ExitCode::not_converged;
  return result;
}

}  // namespace hadamard
