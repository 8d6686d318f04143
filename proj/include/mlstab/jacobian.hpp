#pragma once

// ============================================================================
// mlstab/jacobian.hpp
//
// Analytic Jacobian of the CPN1 residual at an operating point.
//
// Column r of S contributes prod_i f_ir with f_ir = 1 - |S_ir| + S_ir v_i,
// so d s_r / d v_i = S_ir * prod_{j != i} f_jr.  The one-factor-removed
// products are formed with prefix/suffix sweeps over the column support —
// no division — which realizes every case of the derivative definition
// (no zero factor, exactly one zero factor, two or more zero factors ->
// zero contribution) as the single exact product rule.  Only structural
// nonzeros are touched: one pass over (Phi, S) per evaluation.
// ============================================================================

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mlstab/eval.hpp"
#include "mlstab/model.hpp"

namespace mlstab {

/// Operating point v_bar (full signal vector, derivative slots included).
struct OperatingPoint {
  SignalVector v_bar;
};

/// Dense Jacobian dh/dv at the point, N_phi x N_v, columns in signal order.
struct JacobianResult {
  Eigen::MatrixXd j;
  OperatingPoint point;
  std::vector<std::string> column_names;
};

/// Computes dh/dv analytically.  Throws std::invalid_argument for non-finite
/// points.  The point need not be an equilibrium.
[[nodiscard]] JacobianResult jacobian(
    const Cpn1Model& model, const OperatingPoint& point,
    EvalBackend backend = EvalBackend::automatic);

/// Chain rule J_total = j_lift.j * j_inner, mapping perturbations of inner
/// coordinates (e.g. an unlifted angle) through the lift Jacobian.  Explicit
/// opt-in; never applied implicitly by the library.
[[nodiscard]] Eigen::MatrixXd chain_rule_jacobian(
    const JacobianResult& j_lift, const Eigen::MatrixXd& j_inner);

}  // namespace mlstab
