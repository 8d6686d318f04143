#pragma once

// ============================================================================
// mlstab/model.hpp
//
// Core data model: implicit multilinear time-invariant (iMTI) systems stored
// in the factorized CPN1 tensor format.
//
// A model is the residual map
//
//     h(v) = Phi * s(v),      s_r(v) = prod_i (1 - |S_ir| + S_ir * v_i),
//
// over the stacked signal vector v = (zdot, z, u, y, alpha) of length
// N_v = 2n + m + p + q.  Phi is N_phi x R, S is N_v x R.  A point v is
// consistent iff h(v) = 0.
// ============================================================================

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace mlstab {

// === Signal partition =======================================================

/// Partition of the signal vector v = (zdot, z, u, y, alpha) with stable
/// name-based lookup.  Derivative slots are named "<state>_dot" and pair
/// one-to-one with the state slots that follow them.
struct SignalPartition {
  int n = 0;  ///< number of states (and derivative slots)
  int m = 0;  ///< number of inputs
  int p = 0;  ///< number of outputs
  int q = 0;  ///< number of algebraic variables

  /// Names for every entry of v, length 2n + m + p + q.
  std::vector<std::string> names;

  [[nodiscard]] int n_v() const { return 2 * n + m + p + q; }

  // Block offsets inside v.
  [[nodiscard]] int zdot_begin() const { return 0; }
  [[nodiscard]] int z_begin() const { return n; }
  [[nodiscard]] int u_begin() const { return 2 * n; }
  [[nodiscard]] int y_begin() const { return 2 * n + m; }
  [[nodiscard]] int alpha_begin() const { return 2 * n + m + p; }

  /// Index of a named signal in v; throws std::invalid_argument if unknown.
  [[nodiscard]] int index_of(const std::string& name) const;

  [[nodiscard]] bool has(const std::string& name) const;

  /// Throws std::invalid_argument when an invariant is violated
  /// (name count, uniqueness, derivative naming convention).
  void validate() const;

  [[nodiscard]] bool operator==(const SignalPartition& other) const;

 private:
  mutable std::unordered_map<std::string, int> index_cache_;
  void ensure_index_cache() const;
};

// === Signal vector ==========================================================

/// One concrete value of the stacked signal vector, tied to its partition.
struct SignalVector {
  Eigen::VectorXd values;
  std::shared_ptr<const SignalPartition> partition;

  [[nodiscard]] double operator[](const std::string& name) const {
    return values[partition->index_of(name)];
  }
  double& operator[](const std::string& name) {
    return values[partition->index_of(name)];
  }
};

// === Lift bookkeeping =======================================================

/// A registered trigonometric lift: the state pair (cos, sin) subject to the
/// unit-circle constraint g(z) = z_cos^2 + z_sin^2 - 1 = 0.  Indices address
/// the *state value* slots of v (range [n, 2n)).
struct LiftPair {
  int cos_index = -1;
  int sin_index = -1;
};

// === CPN1 model =============================================================

/// Immutable factorized iMTI model.  All evaluation helpers precompute the
/// column sparsity once at construction so hot loops touch only structural
/// nonzeros; the object is safe to share across threads.
class Cpn1Model {
 public:
  /// Empty model (no signals, no equations): a valid placeholder for
  /// aggregates whose real model is assembled later.
  Cpn1Model();

  /// Validates dimensions and invariants; throws std::invalid_argument on
  /// any violation (messages name the offending quantity).
  Cpn1Model(SignalPartition partition, Eigen::MatrixXd phi,
            Eigen::MatrixXd s_struct, std::vector<LiftPair> lifts = {},
            std::vector<std::string> equation_names = {});

  [[nodiscard]] const SignalPartition& partition() const { return *partition_; }
  [[nodiscard]] const std::shared_ptr<const SignalPartition>& partition_ptr()
      const {
    return partition_;
  }
  [[nodiscard]] const Eigen::MatrixXd& phi() const { return phi_; }
  [[nodiscard]] const Eigen::MatrixXd& s_struct() const { return s_struct_; }

  [[nodiscard]] int r() const { return static_cast<int>(phi_.cols()); }
  [[nodiscard]] int n_phi() const { return static_cast<int>(phi_.rows()); }
  [[nodiscard]] int n_v() const { return partition_->n_v(); }
  /// Number of algebraic equations Q = N_phi - n - p.
  [[nodiscard]] int big_q() const {
    return n_phi() - partition_->n - partition_->p;
  }

  [[nodiscard]] const std::vector<LiftPair>& lifts() const { return lifts_; }
  /// Optional per-equation labels (empty, or exactly N_phi entries).
  [[nodiscard]] const std::vector<std::string>& equation_names() const {
    return equation_names_;
  }

  /// Rows i with S_ir != 0 for column r.
  [[nodiscard]] std::span<const std::int32_t> col_support(int r) const {
    return {support_rows_.data() + support_offsets_[r],
            support_offsets_[r + 1] - support_offsets_[r]};
  }

  struct PhiEntry {
    std::int32_t row;
    double value;
  };
  /// Nonzeros of Phi column r.
  [[nodiscard]] std::span<const PhiEntry> phi_col(int r) const {
    return {phi_entries_.data() + phi_offsets_[r],
            phi_offsets_[r + 1] - phi_offsets_[r]};
  }

  /// Fresh zero-initialized signal vector bound to this model's partition.
  [[nodiscard]] SignalVector make_vector() const;
  [[nodiscard]] SignalVector make_vector(Eigen::VectorXd values) const;

  /// Residual of every registered lift constraint g = zc^2 + zs^2 - 1 at v.
  [[nodiscard]] Eigen::VectorXd lift_residual(const Eigen::VectorXd& v) const;

 private:
  std::shared_ptr<const SignalPartition> partition_;
  Eigen::MatrixXd phi_;
  Eigen::MatrixXd s_struct_;
  std::vector<LiftPair> lifts_;
  std::vector<std::string> equation_names_;

  // CSR-ish layout of the structural nonzeros, built once.
  std::vector<std::int32_t> support_rows_;
  std::vector<std::size_t> support_offsets_;
  std::vector<PhiEntry> phi_entries_;
  std::vector<std::size_t> phi_offsets_;
};

// === Sparsity report ========================================================

/// Structural summary used by the CLI and docs.
struct SparsityReport {
  int r = 0;
  int n_v = 0;
  int n_phi = 0;
  long nnz_phi = 0;
  long nnz_s = 0;
  /// Factor degree (support size) of each column of S.
  std::vector<int> col_degrees;
};

[[nodiscard]] SparsityReport sparsity_report(const Cpn1Model& model);

/// Throws std::invalid_argument unless the vector is bound to a partition
/// structurally equal to the model's (pointer fast path first).
void check_compatible(const Cpn1Model& model, const SignalVector& v);

}  // namespace mlstab
