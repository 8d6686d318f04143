// ============================================================================
// blocks.hpp — multilinearization helpers and the power-system block library.
//
// Every block is returned as a standalone Cpn1Model fragment whose free
// signals are inputs; larger systems wire fragments together either through
// compose() or by re-stating the equations in a single EquationBuilder.
// ============================================================================
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mlstab/builder.hpp"
#include "mlstab/model.hpp"

namespace mlstab {

// ============================================================================
// Parameters
// ============================================================================

/// Named physical and controller parameters shared by all blocks. Network
/// quantities are SI at the 230 kV / 100 MVA, 50 Hz base; controller
/// references are per-unit. Derived fields (omega_b, v_peak, r_g, l_g) are
/// filled by default_params() from the base data.
struct BlockParams {
  // Base and network data
  double s_b = 100e6;        ///< rated apparent power [VA]
  double v_ll = 230e3;       ///< line-to-line RMS voltage [V]
  double f_0 = 50.0;         ///< nominal frequency [Hz]
  double omega_b = 0.0;      ///< nominal angular frequency [rad/s] (derived)
  double scr = 5.0;          ///< short-circuit ratio of the Thevenin grid
  double x_over_r = 10.0;    ///< grid reactance-to-resistance ratio
  double v_peak = 0.0;       ///< peak line-to-ground voltage [V] (derived)
  double r_g = 0.0;          ///< Thevenin resistance [ohm] (derived)
  double l_g = 0.0;          ///< Thevenin inductance [H] (derived)
  double r_load = 0.0;       ///< load resistance [ohm] (derived)
  double p_load_pu = 0.8;    ///< nominal load sizing the derived r_load
  double source_scale = 1.0; ///< Thevenin source magnitude multiplier

  // Converter output filter (SI values)
  double r_f = 10.58;        ///< filter resistance [ohm] (0.02 pu)
  double l_f = 0.1178676;    ///< filter inductance [H] (0.07 pu)

  // Swing loop. The swing equation uses the sign convention
  // 2 h omega' = (p_ref - p/s_b) + k_d (omega - omega_ref), so damping
  // requires k_d < 0; the benchmark overrides the positive tabulated value.
  double h = 1.0;            ///< inertia constant [s]
  double k_d = 50.0;         ///< frequency feedback gain
  double omega_ref = 1.0;    ///< frequency reference [pu]

  // Reactive droop
  double omega_f = 20.0;     ///< measurement filter cutoff [rad/s]
  double k_q = 3.7559e-4;    ///< droop gain [V/var]
  double v_ref = 0.0;        ///< voltage reference [V] (derived = v_peak)

  // Virtual admittance
  double r_v = 0.30;         ///< virtual resistance [ohm]
  double l_v = 0.03;         ///< virtual inductance [H]

  // Current control
  double k_p_cc = 117.87;    ///< proportional gain [H/s]
  double k_i_cc = 1058.0;    ///< integral gain [ohm/s]

  // PLL and PQ control
  double k_p_pll = 1.065e-4;
  double k_i_pll = 0.0011;
  double k_p_pq = 1e-4;
  double k_i_pq = 1e-2;

  // Generic second-order PLL gains (standalone pll_block)
  double k_p = 0.5;
  double k_i = 9.0;

  // Standalone RL branch (defaults to the Thevenin branch data)
  double r_kl = 0.0;         ///< branch resistance [ohm] (derived)
  double l_kl = 0.0;         ///< branch inductance [H] (derived)
  double omega_g = 0.0;      ///< branch frame frequency [rad/s] (derived)

  // References
  double p_ref = 0.4;        ///< active power reference [pu]
  double q_ref = 0.0;        ///< reactive power reference [pu]
};

/// Table defaults with all derived network values filled in.
[[nodiscard]] BlockParams default_params();

/// JSON round trip for parameter files; unknown keys are rejected.
[[nodiscard]] std::string params_to_json(const BlockParams& params);
[[nodiscard]] BlockParams params_from_json(const std::string& text);
[[nodiscard]] BlockParams load_params(const std::string& path);

// ============================================================================
// Lifting helpers
// ============================================================================

/// Description of a trigonometric state lift: angle -> (cos, sin) states.
struct TrigLift {
  std::string angle_name;
  std::string cos_name;
  std::string sin_name;
  std::string rate_expr;  ///< signal equal to the angle's time derivative
};

/// Fragment modeling x1' = prod_i x_i^{d_i}. Powers >= 2 spawn copy
/// variables so every product stays multilinear in distinct symbols.
[[nodiscard]] Cpn1Model lift_polynomial(
    const std::vector<std::pair<std::string, int>>& powers);

/// Fragment with the lifted angle dynamics z_cos' = -(rate) z_sin and
/// z_sin' = (rate) z_cos. If the rate expression touches the lift states
/// themselves, copy variables are inserted so the products stay multilinear.
[[nodiscard]] Cpn1Model lift_trig(const TrigLift& lift,
                                  const std::vector<EquationBuilder::Term>& rate);

/// Fragment defining the frame products h1 = cos(theta_i - theta_g),
/// h2 = sin(theta_i - theta_g) from two lifts, plus the rotation of a (D,Q)
/// pair into the local (d,q) frame; the inverse rotation is the transpose.
[[nodiscard]] Cpn1Model rotation_block(const TrigLift& local,
                                       const TrigLift& global_frame);

// ============================================================================
// Power-system component library
// ============================================================================

/// Second-order PLL in lifted form: 3 states, 2 copy variables, 2 inputs,
/// 5 equations, 15 factor columns.
[[nodiscard]] Cpn1Model pll_block(const BlockParams& params);

/// Virtual synchronous machine: swing dynamics plus the lifted angle.
/// `omega_frame` (pu) subtracts a co-rotating reference frame from the angle
/// advance; 0 keeps the absolute-angle form.
[[nodiscard]] Cpn1Model vsm_block(const BlockParams& params,
                                  double omega_frame = 0.0);

/// Reactive droop with a first-order measurement filter.
[[nodiscard]] Cpn1Model droop_q_block(const BlockParams& params);

/// Virtual admittance: current reference from a voltage-error input.
[[nodiscard]] Cpn1Model virtual_admittance_block(const BlockParams& params);

/// PI current control with frequency decoupling and voltage feedforward.
[[nodiscard]] Cpn1Model current_control_block(const BlockParams& params);

/// Series RL branch between two nodes in a rotating frame whose frequency is
/// the input signal omega_g (keeps the model multilinear).
[[nodiscard]] Cpn1Model rl_branch_block(const BlockParams& params);

/// Resistive node: v_DQ = r_load * signed sum of branch currents.
[[nodiscard]] Cpn1Model resistive_load_block(const BlockParams& params,
                                             int n_branches = 1,
                                             std::vector<double> signs = {});

/// Names accepted by block_by_name (and the CLI `block` command).
[[nodiscard]] std::vector<std::string> block_names();

/// Builds a library block by name; throws on unknown names.
[[nodiscard]] Cpn1Model block_by_name(const std::string& name,
                                      const BlockParams& params);

}  // namespace mlstab
