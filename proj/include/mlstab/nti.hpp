// ============================================================================
// nti.hpp — classical nonlinear (trig-as-trig) reference models used as
// oracles: a generic small-ODE trapezoidal integrator, the 2-state PLL, and
// the 19-state three-bus network ODE.
// ============================================================================
#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mlstab/blocks.hpp"

namespace mlstab {

// ============================================================================
// Generic implicit integration of small dense ODEs
// ============================================================================

struct OdeResult {
  std::vector<double> times;
  Eigen::MatrixXd states;  ///< one row per time, one column per state
};

/// Fixed-step trapezoidal rule with damped Newton (finite-difference
/// Jacobian); suitable for the small stiff reference models.
[[nodiscard]] OdeResult integrate_trapezoidal(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& rhs,
    const Eigen::VectorXd& x0, double t_begin, double t_end, double dt);

/// Central-difference Jacobian of an autonomous vector field.
[[nodiscard]] Eigen::MatrixXd fd_jacobian(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& rhs,
    const Eigen::VectorXd& x, double step_scale = 1e-6);

// ============================================================================
// 2-state PLL reference
// ============================================================================

/// x = (x1, x2): x1' = x2 - k_p (u1 sin x1 + u2 cos x1),
///               x2' = -k_i (u1 sin x1 + u2 cos x1).
[[nodiscard]] Eigen::Vector2d pll_nti_rhs(double k_p, double k_i, double u1,
                                          double u2, const Eigen::Vector2d& x);

/// Analytic Jacobian of pll_nti_rhs at x.
[[nodiscard]] Eigen::Matrix2d pll_nti_jacobian(double k_p, double k_i,
                                               double u1, double u2,
                                               const Eigen::Vector2d& x);

// ============================================================================
// 19-state three-bus reference
// ============================================================================

/// Nonlinear ODE of the three-bus benchmark with the grid frame frozen at
/// nominal frequency. States:
///   0 omega_v   1 delta_v   2 x_qf    3 x_vad   4 x_vaq   5 x_id   6 x_iq
///   7 delta_p   8 z3        9 x_ip   10 x_iqpq 11 x_cd   12 x_cq
///  13 i_gD    14 i_gQ     15 i_cDm  16 i_cQm  17 i_cDl  18 i_cQl
/// Inputs u = (p_ref_gfm, q_ref_gfm, omega_ref, v_ref, p_ref_gfl, q_ref_gfl).
struct NtiModel {
  static constexpr int kStates = 19;

  BlockParams params;
  Eigen::VectorXd u;

  [[nodiscard]] static std::vector<std::string> state_names();
  /// Output signals appended to simulation samples, in order.
  [[nodiscard]] static std::vector<std::string> output_names();

  [[nodiscard]] Eigen::VectorXd rhs(const Eigen::VectorXd& x) const;
  [[nodiscard]] Eigen::VectorXd outputs(const Eigen::VectorXd& x) const;
  [[nodiscard]] Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const;
};

/// Integrates the reference model and returns rows of (states, outputs);
/// column names are state_names() followed by output_names().
struct NtiTrajectory {
  std::vector<double> times;
  Eigen::MatrixXd samples;
  std::vector<std::string> column_names;

  [[nodiscard]] Eigen::VectorXd series(const std::string& name) const;
};

[[nodiscard]] NtiTrajectory nti_simulate(const NtiModel& model,
                                         const Eigen::VectorXd& x0,
                                         double t_begin, double t_end,
                                         double dt);

}  // namespace mlstab
