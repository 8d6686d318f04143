#include "mlstab/full_tensor.hpp"

#include <cmath>
#include <stdexcept>

namespace mlstab {

namespace {

constexpr int kMaxFullTensorSignals = 16;

void check_signal_guard(int n_v) {
  if (n_v > kMaxFullTensorSignals) {
    throw std::invalid_argument(
        "full-tensor expansion is limited to " +
        std::to_string(kMaxFullTensorSignals) + " signals, model has " +
        std::to_string(n_v));
  }
}

}  // namespace

FullTensorModel::FullTensorModel(SignalPartition partition, int n_phi)
    : partition_(std::make_shared<const SignalPartition>(std::move(partition))),
      n_phi_(n_phi) {
  partition_->validate();
  check_signal_guard(partition_->n_v());
  if (n_phi_ <= 0) {
    throw std::invalid_argument("full tensor needs at least one equation");
  }
  entries_.assign(static_cast<std::size_t>(n_phi_) << partition_->n_v(), 0.0);
}

std::size_t FullTensorModel::flat_index(int equation, unsigned mask) const {
  if (equation < 0 || equation >= n_phi_ || mask >= (1u << n_v())) {
    throw std::invalid_argument("full-tensor index out of range");
  }
  return (static_cast<std::size_t>(equation) << n_v()) + mask;
}

long FullTensorModel::nonzero_count() const {
  long count = 0;
  for (const double e : entries_) {
    if (e != 0.0) ++count;
  }
  return count;
}

FullTensorModel to_full_tensor(const Cpn1Model& model) {
  check_signal_guard(model.n_v());
  FullTensorModel tensor(model.partition(), model.n_phi());

  // Each column r contributes prod_{i in support} (a_i + b_i v_i) with
  // a_i = 1 - |S_ir| and b_i = S_ir; expanding the product scatters one
  // coefficient per subset of the support.
  for (int r = 0; r < model.r(); ++r) {
    const auto support = model.col_support(r);
    const int deg = static_cast<int>(support.size());
    const auto& s = model.s_struct();
    for (unsigned subset = 0; subset < (1u << deg); ++subset) {
      double coeff = 1.0;
      unsigned mask = 0;
      for (int j = 0; j < deg; ++j) {
        const int i = support[j];
        const double s_ir = s(i, r);
        if (subset & (1u << j)) {
          coeff *= s_ir;
          mask |= 1u << i;
        } else {
          coeff *= 1.0 - std::abs(s_ir);
        }
      }
      if (coeff == 0.0) continue;
      for (const auto& entry : model.phi_col(r)) {
        tensor.entry(entry.row, mask) += entry.value * coeff;
      }
    }
  }
  return tensor;
}

Eigen::VectorXd contract_full(const FullTensorModel& tensor,
                              const SignalVector& v) {
  if (!v.partition || !(*v.partition == tensor.partition())) {
    throw std::invalid_argument(
        "signal vector partition does not match the tensor");
  }
  const int n_v = tensor.n_v();
  const long monomials = tensor.monomial_count();

  // Monomial values over the bitmask lattice: m[mask] = m[mask without its
  // lowest set bit] * v[lowest bit].
  std::vector<double> monomial(static_cast<std::size_t>(monomials));
  monomial[0] = 1.0;
  for (long mask = 1; mask < monomials; ++mask) {
    const unsigned u = static_cast<unsigned>(mask);
    const int low = __builtin_ctz(u);
    monomial[mask] = monomial[mask & (mask - 1)] * v.values[low];
  }

  Eigen::VectorXd out = Eigen::VectorXd::Zero(tensor.n_phi());
  for (int k = 0; k < tensor.n_phi(); ++k) {
    double sum = 0.0;
    const std::size_t base = static_cast<std::size_t>(k) << n_v;
    for (long mask = 0; mask < monomials; ++mask) {
      const double e = tensor.entries()[base + mask];
      if (e != 0.0) sum += e * monomial[mask];
    }
    out[k] = sum;
  }
  return out;
}

}  // namespace mlstab
