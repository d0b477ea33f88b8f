// Batch front end for the adequacy engine, accreditation suite, demand
// curves, auction clearing, level-curve studies and LOLE calibration.

#include <chrono>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mricap/accreditation.hpp"
#include "mricap/config.hpp"
#include "mricap/demand_curve.hpp"
#include "mricap/engine.hpp"
#include "mricap/market.hpp"
#include "mricap/report.hpp"

namespace {

using namespace mricap;

struct GlobalArgs {
  std::uint64_t seed = 42;
  long reps = 10'000;
  double delta = 1.0;
  std::string out_dir = ".";
  std::string format = "csv";
  int workers = 1;
  bool exact = false;
  long long exact_cap = 10'000'000;
};

Evaluator make_evaluator(const GlobalArgs& g) {
  SimOptions sim;
  sim.replications = g.reps;
  sim.seed = g.seed;
  sim.workers = g.workers;
  if (g.exact) return Evaluator::exact_with(sim, g.exact_cap);
  return Evaluator::monte_carlo_with(sim);
}

RunManifest make_manifest(const GlobalArgs& g, const std::string& command,
                          const std::string& config_path) {
  RunManifest m;
  m.command = command;
  m.config_path = config_path;
  m.seed = g.seed;
  m.replications = g.reps;
  m.delta = g.delta;
  m.workers = g.workers;
  return m;
}

std::string out_path(const GlobalArgs& g, const std::string& name) {
  if (g.out_dir.empty() || g.out_dir == ".") return name;
  return g.out_dir + "/" + name;
}

void emit(const std::string& path, const std::string& content) {
  write_text_file(path, content);
  std::cout << "wrote " << path << "\n";
}

// "lo:hi:n" -> n evenly spaced values from lo to hi inclusive.
std::vector<double> parse_range(const std::string& text) {
  double lo = 0.0, hi = 0.0;
  int n = 0;
  if (std::sscanf(text.c_str(), "%lf:%lf:%d", &lo, &hi, &n) != 3 || n < 1)
    throw ConfigError("expected a range lo:hi:count, got '" + text + "'");
  std::vector<double> out;
  if (n == 1) {
    out.push_back(lo);
    return out;
  }
  for (int i = 0; i < n; ++i) out.push_back(lo + (hi - lo) * i / (n - 1));
  return out;
}

std::vector<std::string> split_csv_list(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

int cmd_simulate(const GlobalArgs& g, const std::string& config_path,
                 bool trace, long trace_rep, bool no_zero_margin) {
  BaseCase base = load_system_config(config_path);
  RunManifest manifest = make_manifest(g, "simulate", config_path);
  manifest.outputs.push_back("metrics.json");
  if (trace) manifest.outputs.push_back("trace.csv");

  SimOptions sim;
  sim.replications = g.reps;
  sim.seed = g.seed;
  sim.workers = g.workers;
  sim.tag_zero_margin_hours = !no_zero_margin;
  if (trace) sim.trace_replication = trace_rep;

  EvalResult r;
  if (g.exact) {
    if (trace)
      throw ConfigError("simulate: --trace requires Monte Carlo mode");
    r = enumerate_exact(base, sim, g.exact_cap);
  } else {
    r = estimate_metrics(base, sim);
  }
  emit(out_path(g, "metrics.json"), metrics_to_json(r.metrics, manifest));
  if (trace && r.trace.has_value())
    emit(out_path(g, "trace.csv"), trace_to_csv(*r.trace, base, manifest));
  return 0;
}

int cmd_accredit(const GlobalArgs& g, const std::string& config_path,
                 const std::string& methods_arg, const std::string& group_arg,
                 const std::string& reference, double lole_delta,
                 double aelcc_tol) {
  BaseCase base = load_system_config(config_path);
  AccreditOptions opts;
  opts.methods.clear();
  for (const auto& m : split_csv_list(methods_arg)) {
    if (m == "ucap")
      opts.methods.push_back(Method::ucap);
    else if (m == "mric")
      opts.methods.push_back(Method::mric);
    else if (m == "aelcc")
      opts.methods.push_back(Method::aelcc);
    else if (m == "melcc")
      opts.methods.push_back(Method::melcc);
    else
      throw ConfigError("unknown method '" + m +
                        "' (expected ucap, mric, aelcc, melcc)");
  }
  opts.est.delta_mw = g.delta;
  opts.est.lole_delta_mw = lole_delta;
  opts.aelcc_opts.tol_lole = aelcc_tol;
  if (!group_arg.empty()) {
    auto eq = group_arg.find('=');
    if (eq == std::string::npos)
      throw ConfigError("expected --group LABEL=member,member,...");
    std::string label = group_arg.substr(0, eq);
    auto members = split_csv_list(group_arg.substr(eq + 1));
    if (base.resources.count(label))
      throw ConfigError("group label '" + label +
                        "' collides with a resource name");
    opts.group = {{label, members}};
  }
  if (!reference.empty()) {
    if (reference != "perfect" && !base.resources.count(reference))
      throw ConfigError("unknown reference resource '" + reference + "'");
    opts.reference = reference;
  }

  RunManifest manifest = make_manifest(g, "accredit", config_path);
  const std::string fname =
      g.format == "json" ? "accreditation.json" : "accreditation.csv";
  manifest.outputs.push_back(fname);

  AccreditationReport report =
      run_accreditation(base, make_evaluator(g), opts);
  for (const auto& e : report.entries)
    for (const auto& w : e.warnings)
      std::cerr << "warning: " << e.name << ": " << w << "\n";
  emit(out_path(g, fname), g.format == "json"
                               ? accreditation_to_json(report, manifest)
                               : accreditation_to_csv(report, manifest));
  return 0;
}

int cmd_curves(const GlobalArgs& g, const std::string& config_path,
               double voll_override, const std::string& sweep_arg) {
  BaseCase base = load_system_config(config_path);
  if (voll_override > 0.0) base.voll = voll_override;
  std::vector<double> sweep = parse_range(sweep_arg);

  RunManifest manifest = make_manifest(g, "curves", config_path);
  manifest.outputs = {"curve_native.csv", "curve_mric.csv"};

  Evaluator eval = make_evaluator(g);
  CurveBuildInfo info;
  DemandCurve native = native_demand_curve(base, sweep, eval, &info);
  for (const auto& w : info.warnings) std::cerr << "warning: " << w << "\n";

  AccreditOptions aopts;
  aopts.methods = {Method::mric};
  aopts.est.delta_mw = g.delta;
  AccreditationReport report = run_accreditation(base, eval, aopts);
  const double rmri_sys = system_demand_rmri(report.entries);
  std::vector<std::string> warnings;
  DemandCurve mric_curve = to_mric_curve(native, rmri_sys, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";

  const std::string comment = manifest_comment(manifest);
  emit(out_path(g, "curve_native.csv"), curve_to_csv(native, comment));
  emit(out_path(g, "curve_mric.csv"), curve_to_csv(mric_curve, comment));
  return 0;
}

int cmd_clear(const GlobalArgs& g, const std::string& offers_path,
              const std::string& curve_path) {
  std::vector<Offer> offers = offers_from_json(read_text_file(offers_path));
  DemandCurve curve = curve_from_csv(read_text_file(curve_path));

  RunManifest manifest = make_manifest(g, "clear", offers_path);
  manifest.outputs = {"clearing.json", "cleared_schedule.csv"};

  ClearingResult r = clear_auction(offers, curve);
  emit(out_path(g, "clearing.json"), clearing_to_json(r, manifest));
  emit(out_path(g, "cleared_schedule.csv"), schedule_to_csv(r, manifest));
  return 0;
}

int cmd_levels(const GlobalArgs& g, const std::string& config_path,
               std::string r1, std::string r2, const std::string& grid_arg) {
  BaseCase base = load_system_config(config_path);
  if (r1.empty() && r2.empty()) {
    std::vector<std::string> names;
    for (const auto& [name, res] : base.resources) names.push_back(name);
    if (names.size() != 2)
      throw ConfigError(
          "levels: pass --r1 and --r2 unless the config has exactly two "
          "resources");
    r1 = names[0];
    r2 = names[1];
  }
  if (r1.empty() || r2.empty())
    throw ConfigError("levels: both --r1 and --r2 are required");
  if (!base.resources.count(r1) || !base.resources.count(r2))
    throw ConfigError("levels: unknown resource in --r1/--r2");

  RunManifest manifest = make_manifest(g, "levels", config_path);
  manifest.outputs = {"levels.csv"};

  EstimatorSettings settings;
  settings.delta_mw = g.delta;
  LevelCurveResult r = level_curves(base, r1, r2, parse_range(grid_arg),
                                    make_evaluator(g), settings);
  for (const auto& p : r.points)
    if (!p.ok)
      std::cerr << "warning: grid point c1=" << p.c1
                << " omitted: " << p.note << "\n";
  emit(out_path(g, "levels.csv"),
       levels_to_csv(r, manifest_comment(manifest)));
  return 0;
}

int cmd_calibrate(const GlobalArgs& g, const std::string& config_path,
                  double target, const std::string& slack, double tol,
                  const std::string& bracket_arg) {
  BaseCase base = load_system_config(config_path);
  double lo = -1.0, hi = -1.0;
  if (!bracket_arg.empty()) {
    if (std::sscanf(bracket_arg.c_str(), "%lf:%lf", &lo, &hi) != 2)
      throw ConfigError("expected --bracket lo:hi");
  }
  RunManifest manifest = make_manifest(g, "calibrate", config_path);
  manifest.outputs = {"calibrated_config.json"};

  CalibrationResult r = calibrate_to_lole(base, slack, target, tol,
                                          make_evaluator(g), lo, hi);
  for (const auto& n : r.notes) std::cerr << "warning: " << n << "\n";
  std::cerr << "calibrated slack " << slack << " to " << r.slack_icap
            << " MW (LOLE " << r.achieved_lole << ", " << r.evaluations
            << " evaluations)\n";
  emit(out_path(g, "calibrated_config.json"),
       write_system_config(r.calibrated));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Resource adequacy simulation and MRI-based capacity accreditation"};
  app.require_subcommand(1);

  GlobalArgs g;
  app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
  app.add_option("--reps", g.reps, "Monte Carlo replications")
      ->capture_default_str();
  app.add_option("--delta", g.delta, "Perturbation size, MW")
      ->capture_default_str();
  app.add_option("--out", g.out_dir, "Output directory")
      ->capture_default_str();
  app.add_option("--format", g.format, "Table format: csv or json")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();
  app.add_option("--workers", g.workers, "Worker threads")
      ->capture_default_str();
  app.add_flag("--exact", g.exact,
               "Use exact enumeration instead of Monte Carlo");
  app.add_option("--exact-cap", g.exact_cap,
                 "Enumeration term cap for --exact")
      ->capture_default_str();

  auto* sim = app.add_subcommand("simulate", "Estimate adequacy metrics");
  std::string sim_config;
  bool sim_trace = false, sim_no_zero = false;
  long sim_trace_rep = 0;
  sim->add_option("config", sim_config, "System config JSON")->required();
  sim->add_flag("--trace", sim_trace, "Write a per-hour scenario trace");
  sim->add_option("--trace-rep", sim_trace_rep,
                  "Replication index for --trace")
      ->capture_default_str();
  sim->add_flag("--no-zero-margin-hours", sim_no_zero,
                "Skip zero-margin MRI hour detection");

  auto* acc = app.add_subcommand("accredit", "Compute accredited capacities");
  std::string acc_config, acc_methods = "ucap,mric", acc_group, acc_ref;
  double acc_lole_delta = 10.0, acc_aelcc_tol = 1e-3;
  acc->add_option("config", acc_config, "System config JSON")->required();
  acc->add_option("--methods", acc_methods,
                  "Comma-separated: ucap,mric,aelcc,melcc")
      ->capture_default_str();
  acc->add_option("--group", acc_group, "Group row: LABEL=member,member,...");
  acc->add_option("--reference", acc_ref,
                  "Reference resource (default perfect capacity)");
  acc->add_option("--lole-delta", acc_lole_delta,
                  "Perturbation size for LOLE-based estimates, MW")
      ->capture_default_str();
  acc->add_option("--aelcc-tol", acc_aelcc_tol,
                  "AELCC bisection LOLE tolerance, days/period")
      ->capture_default_str();

  auto* cur = app.add_subcommand("curves", "Build capacity demand curves");
  std::string cur_config, cur_sweep = "0.9:1.1:21";
  double cur_voll = 0.0;
  cur->add_option("config", cur_config, "System config JSON")->required();
  cur->add_option("--voll", cur_voll, "Override the config VOLL, $/MWh");
  cur->add_option("--sweep", cur_sweep, "Scale sweep lo:hi:count")
      ->capture_default_str();

  auto* clr = app.add_subcommand("clear", "Clear a capacity auction");
  std::string clr_offers, clr_curve;
  clr->add_option("offers", clr_offers, "Offers JSON")->required();
  clr->add_option("--curve", clr_curve, "Demand curve CSV")->required();

  auto* lvl = app.add_subcommand("levels", "Two-resource level-curve study");
  std::string lvl_config, lvl_r1, lvl_r2, lvl_grid = "0.5:1.5:11";
  lvl->add_option("config", lvl_config, "System config JSON")->required();
  lvl->add_option("--r1", lvl_r1, "First (swept) resource");
  lvl->add_option("--r2", lvl_r2, "Second (solved) resource");
  lvl->add_option("--grid", lvl_grid, "C1 scale grid lo:hi:count")
      ->capture_default_str();

  auto* cal = app.add_subcommand("calibrate",
                                 "Bisect slack capacity to a LOLE target");
  std::string cal_config, cal_slack, cal_bracket;
  double cal_target = 0.1, cal_tol = 0.005;
  cal->add_option("config", cal_config, "System config JSON")->required();
  cal->add_option("--target-lole", cal_target, "Target LOLE, days/period")
      ->required();
  cal->add_option("--slack", cal_slack, "Perfect slack resource name")
      ->required();
  cal->add_option("--tol", cal_tol, "LOLE tolerance")->capture_default_str();
  cal->add_option("--bracket", cal_bracket, "Slack capacity bracket lo:hi");

  // Let global flags appear after the subcommand name.
  for (auto* s : app.get_subcommands(static_cast<CLI::App*>(nullptr)))
    s->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  const auto t0 = std::chrono::steady_clock::now();
  int rc = 0;
  try {
    if (sim->parsed())
      rc = cmd_simulate(g, sim_config, sim_trace, sim_trace_rep, sim_no_zero);
    else if (acc->parsed())
      rc = cmd_accredit(g, acc_config, acc_methods, acc_group, acc_ref,
                        acc_lole_delta, acc_aelcc_tol);
    else if (cur->parsed())
      rc = cmd_curves(g, cur_config, cur_voll, cur_sweep);
    else if (clr->parsed())
      rc = cmd_clear(g, clr_offers, clr_curve);
    else if (lvl->parsed())
      rc = cmd_levels(g, lvl_config, lvl_r1, lvl_r2, lvl_grid);
    else if (cal->parsed())
      rc = cmd_calibrate(g, cal_config, cal_target, cal_slack, cal_tol,
                         cal_bracket);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  const auto t1 = std::chrono::steady_clock::now();
  std::cerr << "done in " << std::chrono::duration<double>(t1 - t0).count()
            << " s\n";
  return rc;
}
