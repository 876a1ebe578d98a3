#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>

#include <json.hpp>

#include "vkwave/analysis.hpp"
#include "vkwave/integrator.hpp"
#include "vkwave/problem.hpp"

namespace vkwave {

using ordered_json = nlohmann::ordered_json;

// Fixed float formatting: 17 significant digits round-trips every double,
// so re-serializing a parsed report reproduces it byte for byte.
inline std::string format_double(double v) {
  if (!std::isfinite(v)) return "null";
  if (v == 0.0) return "0";  // normalize negative zero, which would not round-trip
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline void write_json(std::ostream& out, const ordered_json& j, int indent) {
  const std::string pad(std::size_t(indent) * 2, ' ');
  const std::string pad_in(std::size_t(indent + 1) * 2, ' ');
  switch (j.type()) {
    case ordered_json::value_t::null:
      out << "null";
      return;
    case ordered_json::value_t::boolean:
      out << (j.get<bool>() ? "true" : "false");
      return;
    case ordered_json::value_t::number_integer:
      out << j.get<long long>();
      return;
    case ordered_json::value_t::number_unsigned:
      out << j.get<unsigned long long>();
      return;
    case ordered_json::value_t::number_float:
      out << format_double(j.get<double>());
      return;
    case ordered_json::value_t::string:
      out << ordered_json(j.get<std::string>()).dump();
      return;
    case ordered_json::value_t::array: {
      if (j.empty()) {
        out << "[]";
        return;
      }
      out << "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        out << pad_in;
        write_json(out, j[i], indent + 1);
        out << (i + 1 < j.size() ? ",\n" : "\n");
      }
      out << pad << "]";
      return;
    }
    case ordered_json::value_t::object: {
      if (j.empty()) {
        out << "{}";
        return;
      }
      out << "{\n";
      std::size_t i = 0;
      for (auto it = j.begin(); it != j.end(); ++it, ++i) {
        out << pad_in << ordered_json(it.key()).dump() << ": ";
        write_json(out, it.value(), indent + 1);
        out << (i + 1 < j.size() ? ",\n" : "\n");
      }
      out << pad << "}";
      return;
    }
    default:
      out << "null";
      return;
  }
}

}  // namespace detail

// Canonical serialization: insertion-ordered keys, 2-space indent, LF
// endings, %.17g floats, trailing newline.
inline std::string dump_json(const ordered_json& j) {
  std::ostringstream out;
  detail::write_json(out, j, 0);
  out << "\n";
  return out.str();
}

inline ordered_json config_to_json(const ProblemConfig& cfg) {
  ordered_json j;
  j["domain"] = {{"L", cfg.L}, {"n_elems", cfg.n_elems}};
  ordered_json k;
  switch (cfg.kernel.family) {
    case RelaxationKernel::Family::Zero:
      k["family"] = "zero";
      break;
    case RelaxationKernel::Family::Exponential:
      k["family"] = "exponential";
      k["g0"] = cfg.kernel.g0;
      k["mu"] = cfg.kernel.mu;
      break;
    case RelaxationKernel::Family::Polynomial:
      k["family"] = "polynomial";
      k["g0"] = cfg.kernel.g0;
      k["nu"] = cfg.kernel.nu;
      break;
    case RelaxationKernel::Family::Tabulated:
      k["family"] = "tabulated";
      k["samples"] = cfg.kernel.table.size();
      break;
  }
  k["mass"] = kernel_mass(cfg.kernel);
  k["allow_l_nonpositive"] = cfg.allow_l_nonpositive;
  j["kernel"] = k;
  ordered_json x;
  switch (cfg.xi.form) {
    case RateFunction::Form::Constant:
      x["form"] = "constant";
      x["c"] = cfg.xi.c;
      break;
    case RateFunction::Form::Hyperbolic:
      x["form"] = "hyperbolic";
      x["nu"] = cfg.xi.nu;
      break;
    case RateFunction::Form::Tabulated:
      x["form"] = "tabulated";
      x["samples"] = cfg.xi.table.size();
      break;
  }
  j["xi"] = x;
  j["coefficients"] = {{"a", cfg.a},         {"b", cfg.b},     {"sigma", cfg.sigma},
                       {"alpha", cfg.alpha}, {"beta", cfg.beta}, {"gamma", cfg.gamma},
                       {"m", cfg.m},         {"p", cfg.p},     {"source_on", cfg.source_on}};
  j["initial"] = {{"u0", cfg.u0_expr}, {"u1", cfg.u1_expr}};
  j["numerics"] = {
      {"dt", cfg.dt},
      {"T_final", cfg.T_final},
      {"output_stride", cfg.output_stride},
      {"blowup_threshold", cfg.blowup_threshold},
      {"memory_mode",
       cfg.memory_mode == MemoryMode::Direct ? "direct" : "fast_exponential"},
      {"snapshot_budget", cfg.snapshot_budget},
      {"thin_max", cfg.thin_max}};
  j["analysis"] = {{"seed", cfg.seed},       {"eps1", cfg.eps1},
                   {"eps2", cfg.eps2},       {"t0_frac", cfg.t0_frac},
                   {"n_starts", cfg.n_starts}};
  if (cfg.d1_override) j["analysis"]["d1"] = *cfg.d1_override;
  return j;
}

inline ordered_json classification_to_json(const Classification& c) {
  ordered_json j;
  j["verdict"] = to_string(c.verdict);
  j["E0"] = c.E0;
  j["I0"] = c.I0;
  j["J0"] = c.J0;
  j["condition_42_lhs"] = c.condition_42_lhs;
  j["d1_estimate"] = c.d1_estimate;
  j["cstar"] = c.cstar;
  j["l"] = c.l;
  j["kernel_mass"] = c.kernel_mass;
  j["kernel_mass_bound"] = c.kernel_mass_bound;
  j["kernel_mass_ok"] = c.kernel_mass_ok;
  j["initial_cross"] = c.initial_cross;
  if (!c.note.empty()) j["note"] = c.note;
  return j;
}

inline ordered_json decay_fit_to_json(const DecayFit& d) {
  ordered_json j;
  j["K_fit"] = d.K_fit;
  j["k_fit"] = d.k_fit;
  j["t0"] = d.t0;
  j["r_squared"] = d.r_squared;
  j["n_points"] = d.n_points;
  return j;
}

inline ordered_json blowup_to_json(const BlowupSummary& s) {
  ordered_json j;
  j["detected"] = s.detected;
  j["message"] = s.message;
  if (!s.detected) return j;
  j["t_cross"] = s.t_cross;
  j["singularity_fit_ok"] = s.singularity.ok;
  if (s.singularity.ok) {
    j["singularity_q"] = s.singularity.q;
    j["singularity_r_squared"] = s.singularity.r_squared;
    j["t_singularity"] = s.singularity.t_singularity;
  }
  j["kappa"] = s.kappa;
  j["F0"] = s.F0;
  j["Fprime0"] = s.Fprime0;
  j["b_const"] = s.b_const;
  j["T0_shift"] = s.T0_shift;
  j["bound_available"] = s.bound_available;
  if (s.bound_available) j["bound_T_star"] = s.bound;
  return j;
}

inline ordered_json ledger_to_json(const EnergyLedger& led) {
  ordered_json j;
  j["records"] = led.size();
  j["approximate_history_functionals"] = led.approximate_history_functionals;
  j["t"] = led.t;
  j["E"] = led.E;
  j["I"] = led.I;
  j["J"] = led.J;
  j["g_circ"] = led.g_circ;
  j["grad_sq"] = led.grad_sq;
  j["grad_4"] = led.grad_4;
  j["lp"] = led.lp;
  j["v_sq"] = led.v_sq;
  j["v_bdry_sq"] = led.v_bdry_sq;
  j["M_coeff"] = led.M_coeff;
  j["diss_rate"] = led.diss_rate;
  j["F"] = led.F;
  j["G"] = led.G;
  j["H"] = led.H;
  j["u_sq"] = led.u_sq;
  j["u_bdry_sq"] = led.u_bdry_sq;
  j["cum_u_sq"] = led.cum_u_sq;
  j["cum_grad_sq"] = led.cum_grad_sq;
  j["cum_grad4"] = led.cum_grad4;
  j["cum_u_bdry_sq"] = led.cum_u_bdry_sq;
  j["cum_diss_alpha"] = led.cum_diss_alpha;
  j["cum_diss_beta"] = led.cum_diss_beta;
  j["cum_diss_gamma"] = led.cum_diss_gamma;
  j["cum_diss_sigma"] = led.cum_diss_sigma;
  j["cum_diss_kernel"] = led.cum_diss_kernel;
  j["source_work"] = led.source_work;
  return j;
}

// Column order of series.csv; frozen interface.
inline const char* series_csv_header() {
  return "t,E,I,J,g_circ,grad_sq,lp,v_sq,v_bdry_sq,M_coeff,diss_rate,F,G,H";
}

inline std::string series_to_csv(const EnergyLedger& led) {
  std::ostringstream out;
  out << series_csv_header() << "\n";
  for (std::size_t i = 0; i < led.size(); ++i) {
    out << format_double(led.t[i]) << ',' << format_double(led.E[i]) << ','
        << format_double(led.I[i]) << ',' << format_double(led.J[i]) << ','
        << format_double(led.g_circ[i]) << ',' << format_double(led.grad_sq[i]) << ','
        << format_double(led.lp[i]) << ',' << format_double(led.v_sq[i]) << ','
        << format_double(led.v_bdry_sq[i]) << ',' << format_double(led.M_coeff[i]) << ','
        << format_double(led.diss_rate[i]) << ',' << format_double(led.F[i]) << ','
        << format_double(led.G[i]) << ',' << format_double(led.H[i]) << "\n";
  }
  return out.str();
}

struct SeriesTable {
  Vec t, E, I, J, g_circ, grad_sq, lp, v_sq, v_bdry_sq, M_coeff, diss_rate, F, G, H;
};

inline SeriesTable read_series_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("series: cannot read '" + path + "'");
  std::string header;
  if (!std::getline(in, header))
    throw std::invalid_argument("series: empty file '" + path + "'");
  SeriesTable s;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    double vals[14];
    for (double& v : vals) {
      std::string tok;
      if (!(ls >> tok)) throw std::invalid_argument("series: short row in '" + path + "'");
      v = (tok == "null" || tok == "nan") ? std::numeric_limits<double>::quiet_NaN()
                                          : std::stod(tok);
    }
    s.t.push_back(vals[0]);
    s.E.push_back(vals[1]);
    s.I.push_back(vals[2]);
    s.J.push_back(vals[3]);
    s.g_circ.push_back(vals[4]);
    s.grad_sq.push_back(vals[5]);
    s.lp.push_back(vals[6]);
    s.v_sq.push_back(vals[7]);
    s.v_bdry_sq.push_back(vals[8]);
    s.M_coeff.push_back(vals[9]);
    s.diss_rate.push_back(vals[10]);
    s.F.push_back(vals[11]);
    s.G.push_back(vals[12]);
    s.H.push_back(vals[13]);
  }
  return s;
}

struct RunReport {
  ProblemConfig cfg;
  RunResult result;
  Classification classification;
  std::optional<DecayFit> decay_fit;
  BlowupSummary blowup;
};

inline ordered_json report_to_json(const RunReport& rep) {
  ordered_json j;
  j["config"] = config_to_json(rep.cfg);
  j["termination"] = to_string(rep.result.termination);
  j["termination_time"] = rep.result.termination_time;
  j["step_count"] = rep.result.step_count;
  j["wall_time_s"] = rep.result.wall_time_s;
  j["classification"] = classification_to_json(rep.classification);
  j["decay_fit"] = rep.decay_fit ? decay_fit_to_json(*rep.decay_fit) : ordered_json();
  j["blowup"] = blowup_to_json(rep.blowup);
  j["ledger"] = ledger_to_json(rep.result.ledger);
  return j;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);  // binary keeps LF endings everywhere
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << content;
}

}  // namespace vkwave
