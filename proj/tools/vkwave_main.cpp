// Command-line front end: simulate, classify, validate kernels, fit decay
// rates, and analyze blow-up, all driven by a key-value config file.
//
// Exit codes are a stable contract:
//   0 ok, 2 blow-up threshold reached, 3 kernel hypotheses violated,
//   4 config error, 5 numeric failure, 6 fit precondition not met.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "vkwave/analysis.hpp"
#include "vkwave/config.hpp"
#include "vkwave/functionals.hpp"
#include "vkwave/integrator.hpp"
#include "vkwave/report.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitBlowup = 2;
constexpr int kExitKernelInvalid = 3;
constexpr int kExitConfigError = 4;
constexpr int kExitNumericFailure = 5;
constexpr int kExitFitPrecondition = 6;

vkwave::ProblemConfig load_config(const std::string& path,
                                  const std::optional<unsigned long>& seed,
                                  bool lenient_kernel) {
  vkwave::ConfigFile cf = vkwave::ConfigFile::parse_file(path);
  vkwave::ProblemConfig cfg = vkwave::problem_from_config(cf, lenient_kernel);
  if (seed) cfg.seed = *seed;
  return cfg;
}

int cmd_validate_kernel(const vkwave::ProblemConfig& cfg) {
  using vkwave::ordered_json;
  // check grid: dense on [0, max(10, horizon)]
  double span = std::max(10.0, cfg.T_final);
  vkwave::Vec grid(1000);
  for (std::size_t i = 0; i < grid.size(); ++i)
    grid[i] = span * double(i) / double(grid.size() - 1);
  vkwave::KernelReport rep = vkwave::check_hypotheses(cfg.kernel, cfg.xi, cfg.a, grid);
  ordered_json j;
  j["l"] = rep.l;
  j["mass"] = rep.mass;
  j["g1_ok"] = rep.g1_ok;
  j["g2_ok"] = rep.g2_ok;
  j["max_violation"] = rep.max_violation;
  j["tolerance"] = rep.tolerance;
  if (!rep.note.empty()) j["note"] = rep.note;
  std::cout << vkwave::dump_json(j);
  return (rep.g1_ok && rep.g2_ok) ? kExitOk : kExitKernelInvalid;
}

int cmd_simulate(const vkwave::ProblemConfig& cfg, const std::string& out_dir) {
  vkwave::RunReport rep;
  rep.cfg = cfg;

  vkwave::SpatialMesh mesh = vkwave::build_mesh(cfg.L, cfg.n_elems);
  vkwave::AssembledOperators ops = vkwave::assemble(mesh);
  rep.classification = vkwave::classify(cfg, ops);
  rep.result = vkwave::run(cfg);
  rep.blowup = vkwave::detect_blowup(rep.result, cfg);
  if (rep.result.termination == vkwave::Termination::Horizon) {
    try {
      rep.decay_fit = vkwave::fit_decay(rep.result.ledger.t, rep.result.ledger.E, cfg.xi,
                                        cfg.t0_frac * cfg.T_final);
    } catch (const vkwave::fit_error&) {
      rep.decay_fit.reset();
    }
  }

  std::filesystem::create_directories(out_dir);
  auto series_path = std::filesystem::path(out_dir) / "series.csv";
  auto report_path = std::filesystem::path(out_dir) / "report.json";
  vkwave::write_text_file(series_path.string(), vkwave::series_to_csv(rep.result.ledger));
  vkwave::write_text_file(report_path.string(),
                          vkwave::dump_json(vkwave::report_to_json(rep)));
  std::cout << "termination: " << vkwave::to_string(rep.result.termination)
            << "  t = " << vkwave::format_double(rep.result.termination_time)
            << "  steps = " << rep.result.step_count << "\n"
            << "wrote " << series_path.string() << " and " << report_path.string()
            << "\n";
  switch (rep.result.termination) {
    case vkwave::Termination::Horizon: return kExitOk;
    case vkwave::Termination::BlowupThreshold: return kExitBlowup;
    case vkwave::Termination::NumericFailure: return kExitNumericFailure;
  }
  return kExitOk;
}

int cmd_classify(const vkwave::ProblemConfig& cfg) {
  vkwave::SpatialMesh mesh = vkwave::build_mesh(cfg.L, cfg.n_elems);
  vkwave::AssembledOperators ops = vkwave::assemble(mesh);
  vkwave::Classification c = vkwave::classify(cfg, ops);
  std::cout << vkwave::dump_json(vkwave::classification_to_json(c));
  return kExitOk;
}

int cmd_decay_fit(const vkwave::ProblemConfig& cfg, const std::string& series_path) {
  vkwave::SeriesTable s = vkwave::read_series_csv(series_path);
  if (s.t.empty()) {
    std::cerr << "decay-fit: empty series\n";
    return kExitFitPrecondition;
  }
  double t0 = cfg.t0_frac * s.t.back();
  try {
    vkwave::DecayFit fit = vkwave::fit_decay(s.t, s.E, cfg.xi, t0);
    std::cout << vkwave::dump_json(vkwave::decay_fit_to_json(fit));
  } catch (const vkwave::fit_error& e) {
    std::cerr << "decay-fit: " << e.what() << "\n";
    return kExitFitPrecondition;
  }
  return kExitOk;
}

int cmd_blowup(const vkwave::ProblemConfig& cfg, const std::string& series_path) {
  using vkwave::ordered_json;
  vkwave::SeriesTable s = vkwave::read_series_csv(series_path);
  if (s.t.empty()) {
    std::cerr << "blowup: empty series\n";
    return kExitConfigError;
  }
  vkwave::BlowupSummary sum;
  // an abnormal end shows up as a series stopping short of the horizon
  // (the crossing step need not coincide with an output record)
  double spacing = s.t.size() >= 2 ? s.t[1] - s.t[0] : cfg.dt;
  bool crossed = s.grad_sq.back() > cfg.blowup_threshold ||
                 !std::isfinite(s.grad_sq.back()) ||
                 s.t.back() < cfg.T_final - 1.5 * spacing;
  if (!crossed) {
    sum.detected = false;
    sum.message = "no blow-up detected";
  } else {
    vkwave::SpatialMesh mesh = vkwave::build_mesh(cfg.L, cfg.n_elems);
    vkwave::AssembledOperators ops = vkwave::assemble(mesh);
    vkwave::Vec u0 = cfg.u0_nodal.value_or(vkwave::Vec(mesh.n_free(), 0.0));
    vkwave::Vec u1 = cfg.u1_nodal.value_or(vkwave::Vec(mesh.n_free(), 0.0));
    double u_sq0 = ops.M_mass.quad_form(u0);
    double ub0 = vkwave::boundary_trace(u0);
    double grad0 = ops.K_stiff.quad_form(u0);
    double cross = ops.M_mass.bilinear(u1, u0) +
                   vkwave::boundary_trace(u1) * ub0 * ops.boundary_mass;
    sum = vkwave::bound_from_initial_data(u_sq0, ub0 * ub0, grad0, grad0 * grad0, cfg,
                                          s.E.front(), cross);
    sum.detected = true;
    sum.message = "gradient norm crossed the blow-up threshold";
    sum.t_cross = s.t.back();
    sum.singularity = vkwave::fit_singularity_time(s.t, s.grad_sq);
  }
  ordered_json j = vkwave::blowup_to_json(sum);
  if (s.t.size() >= 3) {
    double dt_rec = s.t[1] - s.t[0];
    double kappa = (cfg.p - 2.0) / 4.0;
    j["concavity_margin"] = vkwave::concavity_margin(s.F, dt_rec, kappa);
  }
  std::cout << vkwave::dump_json(j);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"viscoelastic Kirchhoff wave simulator and analysis toolkit"};
  app.require_subcommand(1);

  std::string config_path, out_dir = ".", series_path;
  unsigned long seed_value = 0;
  bool seed_set = false;

  auto add_seed = [&](CLI::App* sub) {
    sub->add_option("--seed", seed_value, "override analysis.seed")
        ->each([&](const std::string&) { seed_set = true; });
  };

  CLI::App* sim = app.add_subcommand("simulate", "run the configured problem");
  sim->add_option("config", config_path, "config file")->required();
  sim->add_option("--out", out_dir, "output directory (series.csv, report.json)");
  add_seed(sim);

  CLI::App* cls = app.add_subcommand("classify", "classify the initial data");
  cls->add_option("config", config_path, "config file")->required();
  add_seed(cls);

  CLI::App* dec = app.add_subcommand("decay-fit", "fit the general decay law to a series");
  dec->add_option("config", config_path, "config file")->required();
  dec->add_option("--series", series_path, "series.csv from a simulate run")->required();
  add_seed(dec);

  CLI::App* blw = app.add_subcommand("blowup", "blow-up analysis of a series");
  blw->add_option("config", config_path, "config file")->required();
  blw->add_option("--series", series_path, "series.csv from a simulate run")->required();
  add_seed(blw);

  CLI::App* vk = app.add_subcommand("validate-kernel", "check the kernel hypotheses");
  vk->add_option("config", config_path, "config file")->required();
  add_seed(vk);

  CLI11_PARSE(app, argc, argv);

  vkwave::ProblemConfig cfg;
  try {
    std::optional<unsigned long> seed;
    if (seed_set) seed = seed_value;
    cfg = load_config(config_path, seed, /*lenient_kernel=*/vk->parsed());
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  }

  try {
    if (sim->parsed()) return cmd_simulate(cfg, out_dir);
    if (cls->parsed()) return cmd_classify(cfg);
    if (dec->parsed()) return cmd_decay_fit(cfg, series_path);
    if (blw->parsed()) return cmd_blowup(cfg, series_path);
    if (vk->parsed()) return cmd_validate_kernel(cfg);
  } catch (const vkwave::numeric_error& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumericFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfigError;
  }
  return kExitOk;
}
