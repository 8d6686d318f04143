// ============================================================================
// bench3bus.hpp — the three-bus benchmark: a grid-forming converter (VSM +
// reactive droop + virtual admittance + current control), a grid-following
// converter (PLL + PQ control + current control), and a Thevenin grid feeding
// a resistive load node.  Provides assembly, equilibrium search, scenario
// runs with linear comparison, the nonlinear reference, and the active-power
// bifurcation sweep.
// ============================================================================
#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mlstab/blocks.hpp"
#include "mlstab/dae.hpp"
#include "mlstab/gep.hpp"
#include "mlstab/ldss.hpp"
#include "mlstab/model.hpp"
#include "mlstab/model_io.hpp"
#include "mlstab/nti.hpp"

namespace mlstab {

// ============================================================================
// Assembly
// ============================================================================

/// Which part of the network to assemble.
enum class Subsystem { full, gfm_only, gfl_only };

[[nodiscard]] Subsystem subsystem_from_string(const std::string& name);

/// Assembled benchmark with its parameter set and the documented state map.
struct NetworkCase {
  Cpn1Model model;
  BlockParams params;
  Subsystem subsystem = Subsystem::full;
  std::vector<std::string> z_gfm;   ///< grid-forming states (9 in the full case)
  std::vector<std::string> z_gfl;   ///< grid-following states (9)
  std::vector<std::string> z_grid;  ///< network states (8)
  std::vector<std::string> u_names; ///< reference inputs (6)
};

/// Benchmark parameter set: the defaults with the swing feedback gain run
/// negative, so the frequency loop damps instead of self-exciting.
[[nodiscard]] BlockParams bench_params();

/// Builds the benchmark model and asserts the structural counts
/// (states 9+9+8, 6 inputs, 58 equations, 165 factor columns for the full
/// system; 16/87 and 15/95 for the single-converter sub-assemblies).
/// Violations raise std::runtime_error naming the deviating quantity.
[[nodiscard]] NetworkCase assemble_3bus(const BlockParams& params,
                                        Subsystem subsystem = Subsystem::full);

// ============================================================================
// Equilibrium
// ============================================================================

/// Input vector (p_ref_gfm, q_ref_gfm, omega_ref, v_ref, p_ref_gfl,
/// q_ref_gfl) read from the parameter set.
[[nodiscard]] Eigen::VectorXd reference_inputs(const BlockParams& params);

/// Newton solve of the steady residual (all derivative slots zero, inputs and
/// frame anchors frozen).  On failure, automatically retries by homotopy:
/// both active-power references are ramped from zero to their targets in ten
/// steps, each warm-starting the next.  Guarantees ||h||_inf <= 1e-8.
[[nodiscard]] OperatingPoint find_equilibrium(const NetworkCase& network,
                                              const Eigen::VectorXd& u);
[[nodiscard]] OperatingPoint find_equilibrium(const NetworkCase& network);

/// Largest relative power-flow mismatch at a point: node balance, and
/// source/terminal power against branch loss plus delivered power, relative
/// to the power base.
[[nodiscard]] double power_balance_error(const NetworkCase& network,
                                         const SignalVector& v);

// ============================================================================
// Scenarios
// ============================================================================

/// A change of network structure at time t: load and/or source scaling.
/// Factors are relative to the scenario's base parameters.
struct StructureEvent {
  double t = 0.0;
  double r_load_factor = 1.0;
  double source_scale_factor = 1.0;
};

/// One benchmark scenario: a time window, structural events (load steps,
/// voltage drops), an input schedule (reference ramps), and the instant at
/// which the linear model is extracted.
struct Scenario {
  std::string name;
  double t_begin = 2.4;
  double t_end = 3.4;
  double t_linearize = 2.499;
  double dt = 1e-4;  ///< recommended integrator step for this scenario
  std::vector<StructureEvent> structure_events;
  std::vector<InputEvent> input_schedule;
  BlockParams params;
};

/// "small-step" (5% load reduction at 2.5 s), "large-step" (50% load
/// reduction at 2.5 s plus a 9% source-voltage drop at 2.6 s), or "hopf"
/// (staircase ramp of both active-power references past the transfer limit).
[[nodiscard]] Scenario make_scenario(const std::string& name);
[[nodiscard]] std::vector<std::string> scenario_names();

/// Everything a scenario run produces.  `linear` holds the trajectory of the
/// extracted descriptor model under the same excitation (structural events
/// enter it as constant residual forcing) when comparison mode is on.
struct ScenarioResult {
  Trajectory imti;
  Trajectory linear;
  bool has_linear = false;
  DescriptorSystem ldss;
  GepSolution gep;
  StabilityVerdict verdict;
  OperatingPoint equilibrium;
  std::vector<double> segment_begins;      ///< start time of each segment
  std::vector<BlockParams> segment_params; ///< parameters active per segment
};

[[nodiscard]] ScenarioResult run_scenario(const Scenario& scenario,
                                          const SolverConfig& config = {},
                                          bool with_linear = true);

// ============================================================================
// Nonlinear reference
// ============================================================================

/// Classical-model state vector translated from a lifted operating point
/// (angles recovered by atan2 of the lift pairs).
[[nodiscard]] Eigen::VectorXd nti_state_from_point(const NetworkCase& network,
                                                   const OperatingPoint& point);

/// Nonlinear reference for a scenario: the classical ODE integrated through
/// the same events from the same equilibrium, plus the eigenvalues of its
/// finite-difference Jacobian at that equilibrium.
struct NtiReference {
  NtiTrajectory trajectory;
  Eigen::VectorXcd eigenvalues;
  Eigen::VectorXd x0;
};

[[nodiscard]] NtiReference nonlinear_reference(const Scenario& scenario,
                                               const ScenarioResult& run,
                                               double dt);

// ============================================================================
// Trajectory comparison
// ============================================================================

/// Per-unitized deviation of one compared signal pair.
struct SignalDeviation {
  std::string imti_name;
  std::string reference_name;
  double max_deviation = 0.0;
};

/// Comparison metrics between the factorized run, the nonlinear reference,
/// and (when present) the linear model: sup-norm deviations of per-unitized
/// signals (each divided by max(1, max |value|) of the reference series).
struct ScenarioComparison {
  std::vector<SignalDeviation> signals;
  double max_deviation = 0.0;        ///< factorized vs nonlinear, whole run
  double linear_terminal_offset = 0.0;  ///< linear vs factorized at t_end
};

[[nodiscard]] ScenarioComparison compare_trajectories(const ScenarioResult& run,
                                                      const NtiReference& ref);

// ============================================================================
// Bifurcation sweep
// ============================================================================

/// One grid point of the active-power sweep.
struct SweepPoint {
  double p_ref = 0.0;
  bool feasible = false;
  GepSolution gep;
  StabilityVerdict verdict;
  /// Dominant complex pair (largest real part among oscillatory eigenvalues).
  double dominant_re = 0.0;
  double dominant_im = 0.0;
};

struct SweepResult {
  std::vector<SweepPoint> points;
  bool crossing_found = false;
  double p_before = 0.0;       ///< last stable grid value
  double p_after = 0.0;        ///< first unstable grid value
  double p_crossing = 0.0;     ///< linear interpolation of the zero crossing
  double crossing_frequency = 0.0;  ///< |Im| of the dominant pair at p_after
  bool truncated = false;      ///< equilibrium search failed mid-sweep
  double last_feasible = 0.0;
};

/// Equilibrium + linearization + eigensolve at every grid value of the
/// active-power reference (applied to both converters).  Points are
/// independent and evaluated in parallel.  The sweep truncates at the first
/// infeasible grid point and reports the last feasible one.
[[nodiscard]] SweepResult bifurcation_sweep(const BlockParams& base,
                                            const std::vector<double>& p_ref_grid);

/// JSON report of a sweep ({points: [{p_ref, feasible, dominant, margin}..],
/// crossing, truncated}).
[[nodiscard]] std::string sweep_to_json(const SweepResult& sweep);

}  // namespace mlstab
