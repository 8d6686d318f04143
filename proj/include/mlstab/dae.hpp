// ============================================================================
// dae.hpp — implicit DAE simulation: consistent initialization, one-step
// implicit integration with Newton refinement, and constraint-drift metrics.
// ============================================================================
#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mlstab/eval.hpp"
#include "mlstab/model.hpp"
#include "mlstab/model_io.hpp"

namespace mlstab {

// ============================================================================
// Configuration
// ============================================================================

/// Integration rule for the implicit one-step method.
enum class StepMethod {
  trapezoidal,
  implicit_euler,
};

[[nodiscard]] StepMethod step_method_from_string(const std::string& name);
[[nodiscard]] std::string to_string(StepMethod method);

/// Solver settings for simulate().
struct SolverConfig {
  double rel_tol = 1e-4;          ///< relative weight in the Newton error norm
  double abs_tol = 1e-6;          ///< absolute weight in the Newton error norm
  double max_step = 1e-4;         ///< largest (and nominal) step size [s]
  double newton_tol = 1e-10;      ///< residual backstop for Newton convergence
  int newton_max_iters = 20;      ///< Newton iteration cap per step
  StepMethod method = StepMethod::trapezoidal;
  bool project_lifts = true;      ///< renormalize registered lift pairs each step
  int jacobian_refresh_every = 1; ///< refactor the iteration matrix every k steps
};

// ============================================================================
// Trajectory
// ============================================================================

/// Step/Newton counters accumulated over one simulate() call.
struct SolverStats {
  long steps_accepted = 0;
  long steps_rejected = 0;
  long newton_iterations = 0;
  long jacobian_factorizations = 0;
};

/// Time-sampled solution of a DAE run. `samples` holds one row per accepted
/// time point with one column per signal (full v layout of the partition).
struct Trajectory {
  std::vector<double> times;
  Eigen::MatrixXd samples;
  std::vector<double> drift;       ///< max |z_c^2 + z_s^2 - 1| per sample
  std::vector<std::string> signal_names;
  SolverStats stats;
  bool completed = true;           ///< false when the run aborted early
  std::string diagnostic;          ///< reason for an early abort

  [[nodiscard]] std::size_t size() const { return times.size(); }
  /// Full signal vector at sample k.
  [[nodiscard]] Eigen::VectorXd at(std::size_t k) const;
  /// Time series of one named signal across all samples.
  [[nodiscard]] Eigen::VectorXd series(const std::string& name) const;
  /// Column index of a named signal; throws if unknown.
  [[nodiscard]] Eigen::Index column_of(const std::string& name) const;
  /// Sample index of the last time <= t; throws if t precedes the grid.
  [[nodiscard]] std::size_t index_at_time(double t) const;
};

// ============================================================================
// Consistent initialization
// ============================================================================

/// Options for consistent_init().
struct InitOptions {
  double tol = 1e-10;       ///< required infinity norm of the stacked residual
  int max_iters = 200;      ///< Gauss-Newton iteration cap
  bool include_lifts = true;///< append lift constraints z_c^2 + z_s^2 - 1 = 0
};

/// Solve h(v) = 0 (plus registered lift constraints) for the entries of v not
/// listed in `frozen`, by damped Gauss-Newton least squares from `guess`.
/// Throws on divergence (reporting the final residual norm) and on a singular
/// iteration matrix (naming the deficient equations).
[[nodiscard]] SignalVector consistent_init(const Cpn1Model& model,
                                           const SignalVector& guess,
                                           const std::vector<std::string>& frozen,
                                           const InitOptions& options = {});

// ============================================================================
// Simulation
// ============================================================================

/// Integrate the square DAE from the consistent point v0 over [t_begin, t_end].
/// Inputs follow the piecewise-constant `schedule`; each event forces an exact
/// step boundary. Step halving on Newton failure goes down to max_step/1024;
/// persistent failure returns the partial trajectory with `completed = false`.
[[nodiscard]] Trajectory simulate(const Cpn1Model& model,
                                  const SignalVector& v0,
                                  const std::vector<InputEvent>& schedule,
                                  double t_begin, double t_end,
                                  const SolverConfig& config = {},
                                  EvalBackend backend = EvalBackend::automatic);

/// Largest lift-constraint violation over the whole trajectory.
[[nodiscard]] double drift_metric(const Trajectory& traj);

/// Lift-constraint violation of a single point (0 when no lifts registered).
[[nodiscard]] double lift_drift(const Cpn1Model& model, const Eigen::VectorXd& v);

// ============================================================================
// Export
// ============================================================================

/// Render a trajectory as CSV. Wide layout: header `t,<signals...>`, one row
/// per sample. Long layout: tidy triples `t,signal,value`.
[[nodiscard]] std::string trajectory_to_csv(const Trajectory& traj,
                                            bool long_format = false);

/// Write trajectory_to_csv() output to a file.
void save_trajectory_csv(const Trajectory& traj, const std::string& path,
                         bool long_format = false);

}  // namespace mlstab
