// ============================================================================
// main.cpp — mlstab command-line front end.
//
// Subcommands: block, compose, simulate, linearize, eig, compare, bench,
// sweep.  Outputs are deterministic CSV/JSON; with --format json, errors are
// emitted as JSON objects on stderr.  Exit codes: 0 success (or stable
// verdict), 1 usage error, 2 unstable verdict, 3 marginal verdict,
// 4 numerical failure.
// ============================================================================
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mlstab/bench3bus.hpp"
#include "mlstab/blocks.hpp"
#include "mlstab/compose.hpp"
#include "mlstab/dae.hpp"
#include "mlstab/eval.hpp"
#include "mlstab/gep.hpp"
#include "mlstab/jacobian.hpp"
#include "mlstab/ldss.hpp"
#include "mlstab/model.hpp"
#include "mlstab/model_io.hpp"
#include "mlstab/nti.hpp"

namespace {

using namespace mlstab;

// ============================================================================
// Shared plumbing
// ============================================================================

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitUnstable = 2;
constexpr int kExitMarginal = 3;
constexpr int kExitNumerical = 4;

struct GlobalOptions {
  std::string format = "table";  ///< table | json
  long seed = 0;                 ///< fixes randomized generation, if any
};

bool json_mode(const GlobalOptions& opts) { return opts.format == "json"; }

void emit_error(const GlobalOptions& opts, const std::string& kind,
                const std::string& message) {
  if (json_mode(opts)) {
    nlohmann::json j;
    j["error"] = {{"kind", kind}, {"message", message}};
    std::cerr << j.dump(2) << "\n";
  } else {
    std::cerr << "mlstab: " << kind << ": " << message << "\n";
  }
}

/// JSON-safe number: non-finite doubles become descriptive strings.
nlohmann::json finite_or_string(double value) {
  if (std::isfinite(value)) return value;
  return value > 0 ? "inf" : (value < 0 ? "-inf" : "nan");
}

void write_or_print(const std::string& output, const std::string& text) {
  if (output.empty() || output == "-") {
    std::cout << text;
  } else {
    write_text_file(output, text);
  }
}

std::string nti_trajectory_csv(const NtiTrajectory& traj) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "t";
  for (const std::string& name : traj.column_names) out << "," << name;
  out << "\n";
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    out << traj.times[k];
    for (Eigen::Index c = 0; c < traj.samples.cols(); ++c) {
      out << "," << traj.samples(static_cast<Eigen::Index>(k), c);
    }
    out << "\n";
  }
  return out.str();
}

std::string classify(const std::complex<double>& lambda, double tol) {
  if (std::abs(lambda) <= tol) return "zero";
  if (lambda.real() > tol) return "unstable";
  if (std::abs(lambda.real()) <= tol) return "marginal";
  return "stable";
}

void print_spectrum_table(const GepSolution& sol,
                          const StabilityVerdict& verdict) {
  std::cout << std::left << std::setw(6) << "#" << std::right << std::setw(16)
            << "re" << std::setw(16) << "im" << std::setw(14) << "|lambda|"
            << std::setw(12) << "damping" << "  class\n";
  std::vector<std::size_t> order(sol.finite.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return sol.finite[a].real() > sol.finite[b].real();
  });
  int row = 0;
  for (const std::size_t i : order) {
    const std::complex<double> lambda = sol.finite[i];
    const double mag = std::abs(lambda);
    std::cout << std::left << std::setw(6) << row++ << std::right
              << std::setw(16) << std::setprecision(6) << std::fixed
              << lambda.real() << std::setw(16) << lambda.imag()
              << std::setw(14) << mag << std::setw(12);
    if (mag > 1e-12) {
      std::cout << -lambda.real() / mag;
    } else {
      std::cout << "-";
    }
    std::cout << "  " << classify(lambda, 1e-9) << "\n";
  }
  for (int k = 0; k < sol.infinite_count; ++k) {
    std::cout << std::left << std::setw(6) << row++ << std::right
              << std::setw(16) << "-" << std::setw(16) << "-" << std::setw(14)
              << "inf" << std::setw(12) << "-" << "  infinite\n";
  }
  std::cout.unsetf(std::ios::fixed);
  std::cout << "verdict: "
            << (verdict.stable ? (verdict.marginal ? "marginal" : "stable")
                               : "unstable")
            << "  margin=" << std::setprecision(6) << verdict.margin
            << "  zero_modes=" << verdict.zero_eigs << "\n";
}

int verdict_exit(const StabilityVerdict& verdict) {
  if (!verdict.stable) return kExitUnstable;
  if (verdict.marginal) return kExitMarginal;
  return kExitOk;
}

// ============================================================================
// Subcommands
// ============================================================================

int cmd_block(const GlobalOptions& opts, const std::string& name,
              const std::string& params_path, const std::string& output) {
  if (name == "list") {
    nlohmann::json names = block_names();
    if (json_mode(opts)) {
      std::cout << names.dump(2) << "\n";
    } else {
      for (const std::string& entry : block_names()) std::cout << entry << "\n";
    }
    return kExitOk;
  }
  const BlockParams params =
      params_path.empty() ? default_params() : load_params(params_path);
  const Cpn1Model model = block_by_name(name, params);
  write_or_print(output, model_to_json(model));
  return kExitOk;
}

int cmd_compose(const GlobalOptions&, const std::vector<std::string>& paths,
                const std::vector<std::string>& link_specs,
                const std::string& output) {
  std::vector<Cpn1Model> parts;
  parts.reserve(paths.size());
  for (const std::string& path : paths) parts.push_back(load_model(path));
  std::vector<Link> links;
  for (const std::string& spec : link_specs) {
    const std::size_t eq = spec.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size()) {
      throw std::invalid_argument("bad --link '" + spec +
                                  "' (expected source=target)");
    }
    links.push_back({spec.substr(0, eq), spec.substr(eq + 1)});
  }
  const Cpn1Model composite = compose(parts, links);
  write_or_print(output, model_to_json(composite));
  return kExitOk;
}

int cmd_simulate(const GlobalOptions&, const std::string& model_path,
                 const std::string& point_path, const std::string& schedule_path,
                 double t_begin, double t_end, const SolverConfig& config,
                 bool reinit, bool long_format, const std::string& output) {
  const Cpn1Model model = load_model(model_path);
  SignalVector v0 = point_path.empty() ? model.make_vector()
                                       : load_point(model, point_path);
  if (reinit) {
    const SignalPartition& part = *v0.partition;
    std::vector<std::string> frozen;
    for (int i = 0; i < part.n; ++i) {
      frozen.push_back(part.names[static_cast<std::size_t>(part.z_begin() + i)]);
    }
    for (int i = 0; i < part.m; ++i) {
      frozen.push_back(part.names[static_cast<std::size_t>(part.u_begin() + i)]);
    }
    v0 = consistent_init(model, v0, frozen);
  }
  const std::vector<InputEvent> schedule =
      schedule_path.empty() ? std::vector<InputEvent>{}
                            : load_schedule(schedule_path);
  const Trajectory traj = simulate(model, v0, schedule, t_begin, t_end, config);
  if (!traj.completed) {
    throw std::runtime_error("integration stopped early at t=" +
                             std::to_string(traj.times.empty()
                                                ? t_begin
                                                : traj.times.back()) +
                             ": " + traj.diagnostic);
  }
  write_or_print(output, trajectory_to_csv(traj, long_format));
  return kExitOk;
}

int cmd_linearize(const GlobalOptions&, const std::string& model_path,
                  const std::string& point_path, double equilibrium_tol,
                  const std::string& output) {
  const Cpn1Model model = load_model(model_path);
  const OperatingPoint point{load_point(model, point_path)};
  const DescriptorSystem sys = extract_ldss(model, point, equilibrium_tol);
  write_or_print(output, ldss_to_json(sys));
  return kExitOk;
}

int cmd_eig(const GlobalOptions& opts, const std::string& ldss_path,
            const std::string& output) {
  const DescriptorSystem sys = load_ldss(ldss_path);
  const GepSolution sol = generalized_eig(sys);
  const StabilityVerdict verdict = stability_verdict(sol);
  if (!output.empty()) write_text_file(output, gep_to_json(sol, verdict));
  if (json_mode(opts)) {
    std::cout << gep_to_json(sol, verdict);
  } else {
    print_spectrum_table(sol, verdict);
  }
  return verdict_exit(verdict);
}

int cmd_compare(const GlobalOptions& opts, const std::string& path_a,
                const std::string& path_b, double tol,
                const std::string& output) {
  const auto spectrum_of = [](const std::string& path) {
    const DescriptorSystem sys = load_ldss(path);
    return generalized_eig(sys).finite;
  };
  const std::vector<std::complex<double>> a = spectrum_of(path_a);
  const std::vector<std::complex<double>> b = spectrum_of(path_b);
  const EigMatchReport report = eig_compare(a, b, tol);

  nlohmann::json j;
  j["tol"] = tol;
  j["max_distance"] = finite_or_string(report.max_distance);
  j["all_within_tol"] = report.all_within_tol;
  j["pairs"] = nlohmann::json::array();
  for (const EigMatch& match : report.pairs) {
    j["pairs"].push_back({{"a", {a[static_cast<std::size_t>(match.index_a)].real(),
                                 a[static_cast<std::size_t>(match.index_a)].imag()}},
                          {"b", {b[static_cast<std::size_t>(match.index_b)].real(),
                                 b[static_cast<std::size_t>(match.index_b)].imag()}},
                          {"distance", match.distance}});
  }
  j["unmatched_a"] = report.unmatched_a;
  j["unmatched_b"] = report.unmatched_b;
  const std::string text = j.dump(2) + "\n";
  if (!output.empty()) write_text_file(output, text);
  if (json_mode(opts)) {
    std::cout << text;
  } else {
    std::cout << "pairs=" << report.pairs.size()
              << " unmatched=" << report.unmatched_a.size() << "/"
              << report.unmatched_b.size() << " max_distance="
              << std::setprecision(6) << report.max_distance
              << (report.all_within_tol ? " (all within tol)\n"
                                        : " (tol exceeded)\n");
  }
  return kExitOk;
}

int cmd_bench(const GlobalOptions& opts, const std::string& which,
              const std::string& scenario_name, double dt, bool with_linear,
              const std::string& outdir) {
  if (which != "3bus") {
    throw std::invalid_argument("unknown benchmark '" + which +
                                "' (only 3bus is available)");
  }
  const Scenario scenario = make_scenario(scenario_name);
  if (dt <= 0.0) dt = scenario.dt;
  SolverConfig config;
  config.max_step = dt;

  const ScenarioResult run = run_scenario(scenario, config, with_linear);
  const NtiReference ref = nonlinear_reference(scenario, run, dt);
  const ScenarioComparison cmp = compare_trajectories(run, ref);

  std::vector<std::complex<double>> nonzero;
  for (const std::complex<double>& lambda : run.gep.finite) {
    if (std::abs(lambda) > 1e-6) nonzero.push_back(lambda);
  }
  std::vector<std::complex<double>> reference_spectrum(
      ref.eigenvalues.data(), ref.eigenvalues.data() + ref.eigenvalues.size());
  const EigMatchReport pairing = eig_compare(nonzero, reference_spectrum, 1e-3);

  nlohmann::json j;
  j["benchmark"] = which;
  j["scenario"] = scenario.name;
  j["window"] = {scenario.t_begin, scenario.t_end};
  j["dt"] = dt;
  j["verdict"] = {{"stable", run.verdict.stable},
                  {"marginal", run.verdict.marginal},
                  {"margin", finite_or_string(run.verdict.margin)},
                  {"zero_modes", run.verdict.zero_eigs}};
  j["signals"] = nlohmann::json::array();
  for (const SignalDeviation& dev : cmp.signals) {
    j["signals"].push_back({{"signal", dev.imti_name},
                            {"reference", dev.reference_name},
                            {"max_deviation", finite_or_string(dev.max_deviation)}});
  }
  j["max_deviation"] = finite_or_string(cmp.max_deviation);
  j["linear_terminal_offset"] = finite_or_string(cmp.linear_terminal_offset);
  j["eig_pairing"] = {{"max_distance", finite_or_string(pairing.max_distance)},
                      {"pairs", pairing.pairs.size()},
                      {"unmatched", pairing.unmatched_a.size() +
                                        pairing.unmatched_b.size()}};
  j["lift_drift"] = finite_or_string(drift_metric(run.imti));
  j["completed"] = run.imti.completed;

  std::filesystem::create_directories(outdir);
  const std::filesystem::path dir(outdir);
  save_trajectory_csv(run.imti, (dir / "imti.csv").string());
  write_text_file((dir / "nti.csv").string(),
                  nti_trajectory_csv(ref.trajectory));
  if (run.has_linear) {
    save_trajectory_csv(run.linear, (dir / "linear.csv").string());
  }
  save_ldss(run.ldss, (dir / "ldss.json").string());
  save_gep(run.gep, run.verdict, (dir / "eigs.json").string());
  write_text_file((dir / "comparison.json").string(), j.dump(2) + "\n");

  if (json_mode(opts)) {
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << "scenario " << scenario.name << " over [" << scenario.t_begin
              << ", " << scenario.t_end << "] s, dt=" << dt << "\n";
    std::cout << "verdict: " << (run.verdict.stable ? "stable" : "unstable")
              << " (margin " << std::setprecision(6) << run.verdict.margin
              << ", " << run.verdict.zero_eigs << " zero modes)\n";
    std::cout << std::left << std::setw(12) << "signal" << std::setw(14)
              << "reference" << std::right << std::setw(16)
              << "max deviation" << "\n";
    for (const SignalDeviation& dev : cmp.signals) {
      std::cout << std::left << std::setw(12) << dev.imti_name << std::setw(14)
                << dev.reference_name << std::right << std::setw(16)
                << std::setprecision(3) << std::scientific
                << dev.max_deviation << "\n";
    }
    std::cout.unsetf(std::ios::scientific);
    std::cout << "max deviation vs nonlinear reference: " << std::setprecision(3)
              << std::scientific << cmp.max_deviation << "\n";
    if (run.has_linear) {
      std::cout << "linear terminal offset: " << cmp.linear_terminal_offset
                << "\n";
    }
    std::cout << "eigenvalue pairing: " << pairing.pairs.size()
              << " pairs, max distance " << pairing.max_distance << "\n";
    std::cout.unsetf(std::ios::scientific);
    std::cout << "artifacts written to " << dir.string() << "\n";
  }
  return kExitOk;
}

int cmd_sweep(const GlobalOptions& opts, double from, double to, int steps,
              const std::string& params_path, const std::string& output) {
  if (steps < 2) throw std::invalid_argument("--steps must be at least 2");
  if (!(to > from)) throw std::invalid_argument("--to must exceed --from");
  const BlockParams base =
      params_path.empty() ? bench_params() : load_params(params_path);
  std::vector<double> grid(static_cast<std::size_t>(steps));
  for (int i = 0; i < steps; ++i) {
    grid[static_cast<std::size_t>(i)] = from + (to - from) * i / (steps - 1);
  }
  const SweepResult sweep = bifurcation_sweep(base, grid);
  const std::string text = sweep_to_json(sweep);
  if (!output.empty()) write_text_file(output, text);
  if (json_mode(opts)) {
    std::cout << text;
  } else {
    std::cout << std::left << std::setw(10) << "p_ref" << std::setw(10)
              << "stable" << std::right << std::setw(16) << "dominant re"
              << std::setw(16) << "dominant im" << "\n";
    for (const SweepPoint& point : sweep.points) {
      std::cout << std::left << std::setw(10) << std::setprecision(4)
                << point.p_ref << std::setw(10)
                << (point.verdict.stable ? "yes" : "no") << std::right
                << std::setw(16) << std::setprecision(6) << point.dominant_re
                << std::setw(16) << point.dominant_im << "\n";
    }
    if (sweep.crossing_found) {
      std::cout << "dominant pair crosses between p_ref=" << sweep.p_before
                << " and " << sweep.p_after << " (interpolated "
                << sweep.p_crossing << ", frequency "
                << sweep.crossing_frequency << " rad/s)\n";
    } else {
      std::cout << "no sign change of the dominant pair on this grid\n";
    }
    if (sweep.truncated) {
      std::cout << "sweep truncated: equilibrium infeasible past p_ref="
                << sweep.last_feasible << "\n";
    }
  }
  return kExitOk;
}

}  // namespace

// ============================================================================
// Entry point
// ============================================================================

int main(int argc, char** argv) {
  GlobalOptions opts;

  CLI::App app{"mlstab — multilinear power-system models: factorized "
               "simulation, analytic linearization, descriptor eigenanalysis"};
  app.require_subcommand(1);
  app.add_option("--format", opts.format, "Output format (table|json)")
      ->check(CLI::IsMember({"table", "json"}));
  app.add_option("--seed", opts.seed,
                 "Seed for any randomized data generation");

  // --- block ---------------------------------------------------------------
  std::string block_name, block_params, block_out;
  CLI::App* block = app.add_subcommand(
      "block", "Emit a library block as model JSON ('block list' to list)");
  block->add_option("name", block_name, "Block name or 'list'")->required();
  block->add_option("--params", block_params, "Parameter JSON file");
  block->add_option("-o,--output", block_out, "Output path (default stdout)");

  // --- compose -------------------------------------------------------------
  std::vector<std::string> compose_paths, compose_links;
  std::string compose_out;
  CLI::App* comp = app.add_subcommand(
      "compose", "Interconnect model JSON files via named links");
  comp->add_option("models", compose_paths, "Model JSON files")
      ->required()
      ->expected(-1);
  comp->add_option("--link", compose_links,
                   "Connection source=target (repeatable)");
  comp->add_option("-o,--output", compose_out, "Output path (default stdout)");

  // --- simulate ------------------------------------------------------------
  std::string sim_model, sim_point, sim_schedule, sim_out;
  double sim_t0 = 0.0, sim_t1 = 1.0;
  bool sim_reinit = false, sim_long = false, sim_euler = false,
       sim_no_project = false;
  SolverConfig sim_config;
  CLI::App* sim = app.add_subcommand(
      "simulate", "Integrate a model JSON over a time window, write CSV");
  sim->add_option("model", sim_model, "Model JSON file")->required();
  sim->add_option("--point", sim_point, "Initial point JSON");
  sim->add_option("--schedule", sim_schedule, "Input-event schedule JSON");
  sim->add_option("--t-begin", sim_t0, "Window start [s]");
  sim->add_option("--t-end", sim_t1, "Window end [s]");
  sim->add_option("--dt", sim_config.max_step, "Step size [s]");
  sim->add_option("--newton-tol", sim_config.newton_tol, "Newton tolerance");
  sim->add_flag("--init", sim_reinit,
                "Re-solve algebraic variables before integrating");
  sim->add_flag("--long", sim_long, "Tidy long-format CSV (t,signal,value)");
  sim->add_flag("--implicit-euler", sim_euler,
                "Use implicit Euler instead of the trapezoid rule");
  sim->add_flag("--no-project-lifts", sim_no_project,
                "Disable per-step lift renormalization");
  sim->add_option("-o,--output", sim_out, "Output path (default stdout)");

  // --- linearize -----------------------------------------------------------
  std::string lin_model, lin_point, lin_out;
  double lin_tol = 1e-8;
  CLI::App* lin = app.add_subcommand(
      "linearize", "Extract the descriptor model at an equilibrium point");
  lin->add_option("model", lin_model, "Model JSON file")->required();
  lin->add_option("--point", lin_point, "Equilibrium point JSON")->required();
  lin->add_option("--tol", lin_tol, "Equilibrium residual tolerance");
  lin->add_option("-o,--output", lin_out, "Output path (default stdout)");

  // --- eig -----------------------------------------------------------------
  std::string eig_path, eig_out;
  CLI::App* eig = app.add_subcommand(
      "eig", "Generalized eigenvalues + stability verdict of a descriptor model");
  eig->add_option("ldss", eig_path, "Descriptor model JSON")->required();
  eig->add_option("-o,--output", eig_out, "Also write the JSON report here");

  // --- compare -------------------------------------------------------------
  std::string cmp_a, cmp_b, cmp_out;
  double cmp_tol = 1e-3;
  CLI::App* cmpc = app.add_subcommand(
      "compare", "Pair the spectra of two descriptor models");
  cmpc->add_option("a", cmp_a, "First descriptor model JSON")->required();
  cmpc->add_option("b", cmp_b, "Second descriptor model JSON")->required();
  cmpc->add_option("--tol", cmp_tol, "Relative pairing tolerance");
  cmpc->add_option("-o,--output", cmp_out, "Also write the JSON report here");

  // --- bench ---------------------------------------------------------------
  std::string bench_which = "3bus", bench_scenario = "small-step",
              bench_outdir = "mlstab-bench-out";
  double bench_dt = 0.0;
  bool bench_no_linear = false;
  CLI::App* bench = app.add_subcommand(
      "bench", "Run a benchmark scenario and its comparison report");
  bench->add_option("case", bench_which, "Benchmark name (3bus)");
  bench->add_option("--scenario", bench_scenario,
                    "small-step | large-step | hopf");
  bench->add_option("--dt", bench_dt,
                    "Step size [s] (default: the scenario's own)");
  bench->add_flag("--no-linear", bench_no_linear,
                  "Skip the linear (descriptor) comparison run");
  bench->add_option("-o,--outdir", bench_outdir, "Artifact directory");

  // --- sweep ---------------------------------------------------------------
  double sweep_from = 0.4, sweep_to = 1.4;
  int sweep_steps = 26;
  std::string sweep_params, sweep_out;
  CLI::App* sweep = app.add_subcommand(
      "sweep", "Eigenvalue sweep over the active-power reference");
  sweep->add_option("--from", sweep_from, "First p_ref value [pu]");
  sweep->add_option("--to", sweep_to, "Last p_ref value [pu]");
  sweep->add_option("--steps", sweep_steps, "Number of grid points");
  sweep->add_option("--params", sweep_params, "Base parameter JSON file");
  sweep->add_option("-o,--output", sweep_out, "Output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (json_mode(opts) && e.get_exit_code() != 0) {
      emit_error(opts, "usage", e.what());
      return kExitUsage;
    }
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*block) return cmd_block(opts, block_name, block_params, block_out);
    if (*comp) return cmd_compose(opts, compose_paths, compose_links, compose_out);
    if (*sim) {
      if (sim_euler) sim_config.method = StepMethod::implicit_euler;
      sim_config.project_lifts = !sim_no_project;
      return cmd_simulate(opts, sim_model, sim_point, sim_schedule, sim_t0,
                          sim_t1, sim_config, sim_reinit, sim_long, sim_out);
    }
    if (*lin) return cmd_linearize(opts, lin_model, lin_point, lin_tol, lin_out);
    if (*eig) return cmd_eig(opts, eig_path, eig_out);
    if (*cmpc) return cmd_compare(opts, cmp_a, cmp_b, cmp_tol, cmp_out);
    if (*bench) {
      return cmd_bench(opts, bench_which, bench_scenario, bench_dt,
                       !bench_no_linear, bench_outdir);
    }
    if (*sweep) {
      return cmd_sweep(opts, sweep_from, sweep_to, sweep_steps, sweep_params,
                       sweep_out);
    }
  } catch (const std::invalid_argument& e) {
    emit_error(opts, "usage", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    emit_error(opts, "numerical", e.what());
    return kExitNumerical;
  }
  return kExitUsage;
}
