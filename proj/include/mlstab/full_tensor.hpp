#pragma once

// ============================================================================
// mlstab/full_tensor.hpp
//
// Dense monomial-tensor oracle for small models.  The parameter tensor H has
// one axis of extent 2 per signal plus an equation axis; entry (b, k) is the
// coefficient of the monomial prod_{i: b_i = 1} v_i in equation k.  Contracting
// H with the monomial tensor of v reproduces the CPN1 residual, which makes
// this the brute-force reference for eval_residual.
//
// Index convention (fixed by this artifact): a monomial is the bitmask
// `mask` with bit i set iff signal i of v = (zdot, z, u, y, alpha) appears;
// the flat entry index is k * 2^(N_v) + mask.
// ============================================================================

#include <vector>

#include <Eigen/Dense>

#include "mlstab/model.hpp"

namespace mlstab {

/// Dense expansion of a CPN1 model; only constructible for N_v <= 16.
class FullTensorModel {
 public:
  FullTensorModel(SignalPartition partition, int n_phi);

  [[nodiscard]] const SignalPartition& partition() const { return *partition_; }
  [[nodiscard]] int n_phi() const { return n_phi_; }
  [[nodiscard]] int n_v() const { return partition_->n_v(); }
  [[nodiscard]] long monomial_count() const { return 1L << n_v(); }

  [[nodiscard]] double entry(int equation, unsigned mask) const {
    return entries_[flat_index(equation, mask)];
  }
  double& entry(int equation, unsigned mask) {
    return entries_[flat_index(equation, mask)];
  }

  [[nodiscard]] const std::vector<double>& entries() const { return entries_; }
  [[nodiscard]] long nonzero_count() const;

 private:
  [[nodiscard]] std::size_t flat_index(int equation, unsigned mask) const;

  std::shared_ptr<const SignalPartition> partition_;
  int n_phi_ = 0;
  std::vector<double> entries_;
};

/// Expands each rank-one CPN1 column into the 2^(N_v) monomial grid.
/// Throws std::invalid_argument when N_v exceeds the size guard.
[[nodiscard]] FullTensorModel to_full_tensor(const Cpn1Model& model);

/// Contracted product of the tensor with the monomial tensor of v: the
/// reference residual.  The monomial values are built by dynamic programming
/// over the bitmask lattice.
[[nodiscard]] Eigen::VectorXd contract_full(const FullTensorModel& tensor,
                                            const SignalVector& v);

}  // namespace mlstab
