#pragma once

// ============================================================================
// mlstab/gep.hpp
//
// Generalized eigenvalue analysis of descriptor systems: QZ-based solve of
// A v = lambda E v (and w A = lambda w E on the left), finite/infinite
// classification, stability verdict, reduction to proper (E = I) form, and
// spectrum comparison utilities.
// ============================================================================

#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mlstab/ldss.hpp"

namespace mlstab {

/// Solver knobs; the infinite-eigenvalue cut is relative to the pencil size.
struct GepConfig {
  /// |beta| <= infinite_tol_scale * max(1, ||E||) classifies the pair
  /// (alpha, beta) as an infinite eigenvalue; alpha is likewise judged
  /// against ||A|| when testing for a singular pencil.  With balancing
  /// enabled the norms are those of the balanced pencil.
  double infinite_tol_scale = 1e-12;
  /// Scale-balance the pencil (exact powers of two, so eigenvalues are
  /// unchanged) before the QZ iteration.  Physical descriptor models mix
  /// entry magnitudes across many decades; without balancing, fast finite
  /// modes can be misclassified as infinite.
  bool balance = true;
};

/// Full pencil decomposition; entries are index-aligned with the raw
/// (alpha, beta) pairs returned by the QZ iteration.
struct GepSolution {
  std::vector<std::complex<double>> finite;  ///< alpha/beta for |beta| > cut
  int infinite_count = 0;
  Eigen::MatrixXcd right_vectors;  ///< column j solves A v = lambda_j E v
  Eigen::MatrixXcd left_vectors;   ///< column j solves v^H A = lambda_j v^H E
  Eigen::VectorXcd alphas;
  Eigen::VectorXd betas;
  std::vector<int> finite_indices;    ///< pencil column of each finite entry
  std::vector<int> infinite_indices;  ///< pencil columns classified infinite

  [[nodiscard]] int dim() const { return static_cast<int>(betas.size()); }
};

/// Small-signal verdict per the strict right-half-plane test; zero
/// eigenvalues are reported but never counted as unstable.
struct StabilityVerdict {
  bool stable = true;
  /// Max real part over the finite eigenvalues outside the zero cluster
  /// (0 when every finite eigenvalue lies inside it).
  double margin = 0.0;
  /// Count of finite eigenvalues with |lambda| <= tol.
  int zero_eigs = 0;
  /// Finite eigenvalue(s) attaining the margin among |lambda| > tol.
  std::vector<std::complex<double>> dominant;
  /// True when a nonzero finite eigenvalue sits on the axis (|Re| <= tol).
  bool marginal = false;
};

/// Solves the pencil (E, A).  Throws std::runtime_error on QZ failure or a
/// singular pencil (alpha and beta both negligible).
[[nodiscard]] GepSolution generalized_eig(const DescriptorSystem& sys,
                                          const GepConfig& config = {});

/// Convenience overload for a raw (E, A) pair.
[[nodiscard]] GepSolution generalized_eig(const Eigen::MatrixXd& e,
                                          const Eigen::MatrixXd& a,
                                          const GepConfig& config = {});

/// The default tolerance absorbs the numerical noise that QZ rounding leaves
/// on structural zero eigenvalues of physically scaled pencils.
[[nodiscard]] StabilityVerdict stability_verdict(const GepSolution& sol,
                                                 double tol = 1e-6);

/// Proper-form reduction: eliminates the algebraic block by Gaussian
/// elimination, leaving x' = a x + b u over the kept (dynamic) coordinates.
struct ProperForm {
  Eigen::MatrixXd a;
  Eigen::MatrixXd b;
  std::vector<std::string> kept_names;
  std::vector<std::string> eliminated_names;
};

/// Throws std::runtime_error naming the rank defect when the algebraic block
/// of A is not invertible at the operating point.
[[nodiscard]] ProperForm to_proper(const DescriptorSystem& sys);

/// Greedy nearest-neighbor pairing between two spectra under the relative
/// metric d(a, b) = |a - b| / max(1, |a|, |b|).
struct EigMatch {
  int index_a = -1;
  int index_b = -1;
  double distance = 0.0;
};
struct EigMatchReport {
  std::vector<EigMatch> pairs;
  std::vector<int> unmatched_a;
  std::vector<int> unmatched_b;
  double max_distance = 0.0;
  bool all_within_tol = true;
};

[[nodiscard]] EigMatchReport eig_compare(
    const std::vector<std::complex<double>>& a,
    const std::vector<std::complex<double>>& b, double tol);

/// JSON export of a solution plus verdict ({finite, infinite_count, verdict}).
[[nodiscard]] std::string gep_to_json(const GepSolution& sol,
                                      const StabilityVerdict& verdict);
void save_gep(const GepSolution& sol, const StabilityVerdict& verdict,
              const std::string& path);

}  // namespace mlstab
