#pragma once

// ============================================================================
// mlstab/ldss.hpp
//
// Linear descriptor state-space extraction.  Around an equilibrium v_bar,
// 0 = h(v_bar + dv) ~ J_zdot * d(zdot) + J_(z,y,alpha) * dx + J_u * du gives
//
//     E dx' = A dx + B du,   E = -J_zdot (zero columns for y/alpha slots),
//                            A = +J over the (z, y, alpha) columns,
//                            B = +J over the u columns.
//
// The descriptor coordinate vector stacks (z, y, alpha); its dimension is
// n + p + q (= n + q for the models in this artifact, which have no separate
// output block).
// ============================================================================

#include <string>
#include <vector>

#include "mlstab/dae.hpp"
#include "mlstab/jacobian.hpp"
#include "mlstab/model.hpp"

namespace mlstab {

/// Linearized descriptor model E x' = A x + B u at a stored operating point.
struct DescriptorSystem {
  Eigen::MatrixXd e;  ///< square, possibly singular
  Eigen::MatrixXd a;  ///< square, same dimension as e
  Eigen::MatrixXd b;  ///< one column per input
  OperatingPoint point;
  std::vector<std::string> state_names;  ///< descriptor coordinates (z, y, alpha)
  std::vector<std::string> input_names;

  [[nodiscard]] int dim() const { return static_cast<int>(e.rows()); }
};

/// Extracts the LDSS at an equilibrium; requires ||h(v_bar)||_inf <= tol and
/// zero derivative slots.  Violations raise std::runtime_error carrying the
/// residual norm so callers know to run the equilibrium finder first.
[[nodiscard]] DescriptorSystem extract_ldss(const Cpn1Model& model,
                                            const OperatingPoint& point,
                                            double equilibrium_tol = 1e-8);

/// JSON round trip ({e, a, b, point, names}).
[[nodiscard]] std::string ldss_to_json(const DescriptorSystem& sys);
void save_ldss(const DescriptorSystem& sys, const std::string& path);
[[nodiscard]] DescriptorSystem ldss_from_json(const std::string& text);
[[nodiscard]] DescriptorSystem load_ldss(const std::string& path);

// === Linear simulation ======================================================

/// Piecewise-constant excitation for simulate_ldss: over [t_begin, t_end) the
/// input deviation `du` and the additive residual forcing `forcing` are held.
/// Empty vectors mean zero.  A forcing vector is how a change of model
/// structure enters the fixed linear model: it is the residual of the changed
/// model evaluated at the linearization point.
struct LdssSegment {
  double t_begin = 0.0;
  double t_end = 0.0;
  Eigen::VectorXd du;
  Eigen::VectorXd forcing;
};

/// Solves the algebraic rows (exact zero rows of E) for the algebraic
/// coordinates (exact zero columns of E) of the deviation x, holding the
/// differential coordinates fixed.  Throws std::runtime_error when the
/// algebraic block is rank-deficient or rows/columns fail to pair up.
[[nodiscard]] Eigen::VectorXd ldss_consistent(const DescriptorSystem& sys,
                                              const Eigen::VectorXd& x,
                                              const Eigen::VectorXd& du,
                                              const Eigen::VectorXd& forcing);

/// Fixed-step trapezoidal integration of E x' = A x + B du + f through the
/// segments.  The deviation is re-made consistent at every segment boundary
/// (both the pre- and post-switch samples are recorded).  Samples hold
/// absolute values: operating point plus deviation over (z, y, alpha).
[[nodiscard]] Trajectory simulate_ldss(const DescriptorSystem& sys,
                                       const Eigen::VectorXd& x0,
                                       const std::vector<LdssSegment>& segments,
                                       double dt);

}  // namespace mlstab
