#pragma once

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>

#include "vkwave/expr.hpp"
#include "vkwave/kernels.hpp"
#include "vkwave/mesh.hpp"
#include "vkwave/problem.hpp"

namespace vkwave {

// Flat-table run configuration: [section] headers with key = value lines,
// '#' comments. All keys are optional unless noted; unknown keys are
// rejected to catch typos early.
class ConfigFile {
 public:
  static ConfigFile parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config: cannot read '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    ConfigFile cf = parse_text(ss.str());
    cf.dir_ = std::filesystem::path(path).parent_path().string();
    return cf;
  }

  static ConfigFile parse_text(const std::string& text) {
    ConfigFile cf;
    std::istringstream in(text);
    std::string line, section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']')
          throw std::invalid_argument("config: malformed section header at line " +
                                      std::to_string(lineno));
        section = trim(line.substr(1, line.size() - 2));
        continue;
      }
      auto eq = line.find('=');
      if (eq == std::string::npos)
        throw std::invalid_argument("config: expected key = value at line " +
                                    std::to_string(lineno));
      std::string key = trim(line.substr(0, eq));
      std::string value = trim(line.substr(eq + 1));
      if (key.empty() || value.empty())
        throw std::invalid_argument("config: empty key or value at line " +
                                    std::to_string(lineno));
      cf.values_[section + "." + key] = value;
    }
    return cf;
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  std::string require_string(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end())
      throw std::invalid_argument("config: missing required key '" + key + "'");
    return it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    return to_double(key, it->second);
  }

  std::size_t get_size(const std::string& key, std::size_t fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    double v = to_double(key, it->second);
    if (v < 0 || v != std::floor(v))
      throw std::invalid_argument("config: '" + key + "' must be a nonnegative integer");
    return std::size_t(v);
  }

  bool get_bool(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::string v = it->second;
    std::transform(v.begin(), v.end(), v.begin(),
                   [](unsigned char c) { return char(std::tolower(c)); });
    if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
    if (v == "false" || v == "no" || v == "off" || v == "0") return false;
    throw std::invalid_argument("config: '" + key + "' must be a boolean");
  }

  const std::map<std::string, std::string>& values() const { return values_; }
  const std::string& dir() const { return dir_; }

 private:
  static std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
  }

  static double to_double(const std::string& key, const std::string& v) {
    try {
      std::size_t end = 0;
      double d = std::stod(v, &end);
      if (end != v.size()) throw std::invalid_argument("");
      return d;
    } catch (...) {
      throw std::invalid_argument("config: '" + key + "' must be a number, got '" + v +
                                  "'");
    }
  }

  std::map<std::string, std::string> values_;
  std::string dir_;
};

// Two-column CSV (s, value) with an optional header line.
inline std::vector<std::pair<double, double>> load_table_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("table: cannot read '" + path + "'");
  std::vector<std::pair<double, double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    double s, g;
    if (ls >> s >> g) rows.emplace_back(s, g);
  }
  if (rows.size() < 2)
    throw std::invalid_argument("table: fewer than two samples in '" + path + "'");
  return rows;
}

inline RelaxationKernel kernel_from_config(const ConfigFile& cf) {
  std::string family = cf.get_string("kernel.family", "zero");
  if (family == "zero") return RelaxationKernel::zero();
  if (family == "exponential")
    return RelaxationKernel::exponential(cf.get_double("kernel.g0", 1.0),
                                         cf.get_double("kernel.mu", 1.0));
  if (family == "polynomial")
    return RelaxationKernel::polynomial(cf.get_double("kernel.g0", 1.0),
                                        cf.get_double("kernel.nu", 2.0));
  if (family == "tabulated") {
    std::string path = cf.require_string("kernel.table");
    if (!cf.dir().empty() && std::filesystem::path(path).is_relative())
      path = (std::filesystem::path(cf.dir()) / path).string();
    return RelaxationKernel::tabulated(load_table_csv(path));
  }
  throw std::invalid_argument("config: unknown kernel.family '" + family + "'");
}

inline RateFunction rate_from_config(const ConfigFile& cf) {
  std::string form = cf.get_string("xi.form", "constant");
  if (form == "constant") return RateFunction::constant(cf.get_double("xi.c", 1.0));
  if (form == "hyperbolic") return RateFunction::hyperbolic(cf.get_double("xi.nu", 2.0));
  if (form == "tabulated") {
    std::string path = cf.require_string("xi.table");
    if (!cf.dir().empty() && std::filesystem::path(path).is_relative())
      path = (std::filesystem::path(cf.dir()) / path).string();
    return RateFunction::tabulated(load_table_csv(path));
  }
  throw std::invalid_argument("config: unknown xi.form '" + form + "'");
}

// Interpolate the initial-data expressions at the free nodes.
inline void resolve_initial_data(ProblemConfig& cfg) {
  SpatialMesh mesh = build_mesh(cfg.L, cfg.n_elems);
  Expr e0 = Expr::parse(cfg.u0_expr);
  Expr e1 = Expr::parse(cfg.u1_expr);
  Vec u0(mesh.n_free()), u1(mesh.n_free());
  for (std::size_t i = 0; i < mesh.n_free(); ++i) {
    double x = mesh.nodes[i + 1];
    u0[i] = e0.eval(x);
    u1[i] = e1.eval(x);
  }
  cfg.u0_nodal = std::move(u0);
  cfg.u1_nodal = std::move(u1);
}

// lenient_kernel skips the residual-stiffness gate; the kernel validation
// command needs to load configs whose kernel it is about to reject.
inline ProblemConfig problem_from_config(const ConfigFile& cf, bool lenient_kernel = false) {
  static const std::map<std::string, int> known = {
      {"domain.L", 1}, {"domain.n_elems", 1},
      {"kernel.family", 1}, {"kernel.g0", 1}, {"kernel.mu", 1}, {"kernel.nu", 1},
      {"kernel.table", 1}, {"kernel.allow_l_nonpositive", 1},
      {"xi.form", 1}, {"xi.c", 1}, {"xi.nu", 1}, {"xi.table", 1},
      {"coefficients.a", 1}, {"coefficients.b", 1}, {"coefficients.sigma", 1},
      {"coefficients.alpha", 1}, {"coefficients.beta", 1}, {"coefficients.gamma", 1},
      {"coefficients.m", 1}, {"coefficients.p", 1}, {"coefficients.source_on", 1},
      {"initial.u0", 1}, {"initial.u1", 1},
      {"numerics.dt", 1}, {"numerics.T_final", 1}, {"numerics.output_stride", 1},
      {"numerics.blowup_threshold", 1}, {"numerics.memory_mode", 1},
      {"numerics.snapshot_budget", 1}, {"numerics.thin_max", 1},
      {"analysis.seed", 1}, {"analysis.eps1", 1}, {"analysis.eps2", 1},
      {"analysis.t0_frac", 1}, {"analysis.n_starts", 1}, {"analysis.d1", 1}};
  for (const auto& [key, value] : cf.values()) {
    (void)value;
    if (!known.count(key))
      throw std::invalid_argument("config: unknown key '" + key + "'");
  }

  ProblemConfig cfg;
  cfg.L = cf.get_double("domain.L", cfg.L);
  cfg.n_elems = cf.get_size("domain.n_elems", cfg.n_elems);
  cfg.kernel = kernel_from_config(cf);
  cfg.allow_l_nonpositive = cf.get_bool("kernel.allow_l_nonpositive", false);
  cfg.xi = rate_from_config(cf);
  cfg.a = cf.get_double("coefficients.a", cfg.a);
  cfg.b = cf.get_double("coefficients.b", cfg.b);
  cfg.sigma = cf.get_double("coefficients.sigma", cfg.sigma);
  cfg.alpha = cf.get_double("coefficients.alpha", cfg.alpha);
  cfg.beta = cf.get_double("coefficients.beta", cfg.beta);
  cfg.gamma = cf.get_double("coefficients.gamma", cfg.gamma);
  cfg.m = cf.get_double("coefficients.m", cfg.m);
  cfg.p = cf.get_double("coefficients.p", cfg.p);
  cfg.source_on = cf.get_bool("coefficients.source_on", cfg.source_on);
  cfg.u0_expr = cf.get_string("initial.u0", cfg.u0_expr);
  cfg.u1_expr = cf.get_string("initial.u1", cfg.u1_expr);
  cfg.dt = cf.get_double("numerics.dt", cfg.dt);
  cfg.T_final = cf.get_double("numerics.T_final", cfg.T_final);
  cfg.output_stride = cf.get_size("numerics.output_stride", cfg.output_stride);
  cfg.blowup_threshold = cf.get_double("numerics.blowup_threshold", cfg.blowup_threshold);
  std::string mode = cf.get_string("numerics.memory_mode", "direct");
  if (mode == "direct") cfg.memory_mode = MemoryMode::Direct;
  else if (mode == "fast_exponential") cfg.memory_mode = MemoryMode::FastExponential;
  else throw std::invalid_argument("config: unknown numerics.memory_mode '" + mode + "'");
  cfg.snapshot_budget = cf.get_size("numerics.snapshot_budget", cfg.snapshot_budget);
  cfg.thin_max = cf.get_size("numerics.thin_max", cfg.thin_max);
  cfg.seed = cf.get_size("analysis.seed", cfg.seed);
  cfg.eps1 = cf.get_double("analysis.eps1", cfg.eps1);
  cfg.eps2 = cf.get_double("analysis.eps2", cfg.eps2);
  cfg.t0_frac = cf.get_double("analysis.t0_frac", cfg.t0_frac);
  cfg.n_starts = cf.get_size("analysis.n_starts", cfg.n_starts);
  if (cf.has("analysis.d1")) cfg.d1_override = cf.get_double("analysis.d1", 0.0);

  if (lenient_kernel) cfg.allow_l_nonpositive = true;
  validate(cfg);
  resolve_initial_data(cfg);
  return cfg;
}

}  // namespace vkwave
