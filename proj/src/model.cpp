#include "mlstab/model.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace mlstab {

namespace {

constexpr const char* kDotSuffix = "_dot";

[[nodiscard]] bool is_finite_matrix(const Eigen::MatrixXd& m) {
  return m.allFinite();
}

}  // namespace

// === SignalPartition ========================================================

void SignalPartition::ensure_index_cache() const {
  if (index_cache_.size() == names.size()) return;
  index_cache_.clear();
  index_cache_.reserve(names.size());
  for (std::size_t i = 0; i < names.size(); ++i) {
    index_cache_.emplace(names[i], static_cast<int>(i));
  }
}

int SignalPartition::index_of(const std::string& name) const {
  ensure_index_cache();
  auto it = index_cache_.find(name);
  if (it == index_cache_.end()) {
    throw std::invalid_argument("unknown signal name: " + name);
  }
  return it->second;
}

bool SignalPartition::has(const std::string& name) const {
  ensure_index_cache();
  return index_cache_.count(name) != 0;
}

void SignalPartition::validate() const {
  if (n < 0 || m < 0 || p < 0 || q < 0) {
    throw std::invalid_argument("signal partition counts must be nonnegative");
  }
  if (static_cast<int>(names.size()) != n_v()) {
    throw std::invalid_argument(
        "signal partition expects " + std::to_string(n_v()) +
        " names, got " + std::to_string(names.size()));
  }
  std::unordered_set<std::string> seen;
  for (const auto& name : names) {
    if (name.empty()) {
      throw std::invalid_argument("signal names must be non-empty");
    }
    if (!seen.insert(name).second) {
      throw std::invalid_argument("duplicate signal name: " + name);
    }
  }
  for (int i = 0; i < n; ++i) {
    const std::string expected = names[z_begin() + i] + kDotSuffix;
    if (names[i] != expected) {
      throw std::invalid_argument(
          "derivative slot " + std::to_string(i) + " is named '" + names[i] +
          "' but its state is '" + names[z_begin() + i] + "' (expected '" +
          expected + "')");
    }
  }
}

bool SignalPartition::operator==(const SignalPartition& other) const {
  return n == other.n && m == other.m && p == other.p && q == other.q &&
         names == other.names;
}

// === Cpn1Model ==============================================================

Cpn1Model::Cpn1Model()
    : Cpn1Model(SignalPartition{}, Eigen::MatrixXd(0, 0),
                Eigen::MatrixXd(0, 0)) {}

Cpn1Model::Cpn1Model(SignalPartition partition, Eigen::MatrixXd phi,
                     Eigen::MatrixXd s_struct, std::vector<LiftPair> lifts,
                     std::vector<std::string> equation_names)
    : partition_(std::make_shared<const SignalPartition>(std::move(partition))),
      phi_(std::move(phi)),
      s_struct_(std::move(s_struct)),
      lifts_(std::move(lifts)),
      equation_names_(std::move(equation_names)) {
  partition_->validate();
  const int nv = partition_->n_v();
  if (s_struct_.rows() != nv) {
    throw std::invalid_argument(
        "structure matrix has " + std::to_string(s_struct_.rows()) +
        " rows but the partition has " + std::to_string(nv) + " signals");
  }
  if (phi_.cols() != s_struct_.cols()) {
    throw std::invalid_argument(
        "parameter matrix has " + std::to_string(phi_.cols()) +
        " columns but the structure matrix has " +
        std::to_string(s_struct_.cols()));
  }
  if (big_q() < 0) {
    throw std::invalid_argument(
        "equation count " + std::to_string(n_phi()) +
        " is smaller than n + p = " +
        std::to_string(partition_->n + partition_->p));
  }
  if (!is_finite_matrix(phi_) || !is_finite_matrix(s_struct_)) {
    throw std::invalid_argument("model matrices must be finite");
  }
  if (!equation_names_.empty() &&
      static_cast<int>(equation_names_.size()) != n_phi()) {
    throw std::invalid_argument("equation_names must be empty or have one "
                                "entry per equation");
  }
  for (const auto& lift : lifts_) {
    const bool cos_ok = lift.cos_index >= partition_->z_begin() &&
                        lift.cos_index < partition_->u_begin();
    const bool sin_ok = lift.sin_index >= partition_->z_begin() &&
                        lift.sin_index < partition_->u_begin();
    if (!cos_ok || !sin_ok) {
      throw std::invalid_argument("lift pair indices must address state slots");
    }
  }

  // Precompute per-column structural nonzeros.
  const int r_count = r();
  support_offsets_.assign(static_cast<std::size_t>(r_count) + 1, 0);
  phi_offsets_.assign(static_cast<std::size_t>(r_count) + 1, 0);
  for (int rr = 0; rr < r_count; ++rr) {
    support_offsets_[rr + 1] = support_offsets_[rr];
    for (int i = 0; i < nv; ++i) {
      if (s_struct_(i, rr) != 0.0) {
        support_rows_.push_back(i);
        ++support_offsets_[rr + 1];
      }
    }
    phi_offsets_[rr + 1] = phi_offsets_[rr];
    for (int k = 0; k < n_phi(); ++k) {
      if (phi_(k, rr) != 0.0) {
        phi_entries_.push_back({k, phi_(k, rr)});
        ++phi_offsets_[rr + 1];
      }
    }
  }
}

SignalVector Cpn1Model::make_vector() const {
  return {Eigen::VectorXd::Zero(n_v()), partition_};
}

SignalVector Cpn1Model::make_vector(Eigen::VectorXd values) const {
  if (values.size() != n_v()) {
    throw std::invalid_argument(
        "signal vector has " + std::to_string(values.size()) +
        " entries, expected " + std::to_string(n_v()));
  }
  return {std::move(values), partition_};
}

Eigen::VectorXd Cpn1Model::lift_residual(const Eigen::VectorXd& v) const {
  Eigen::VectorXd g(lifts_.size());
  for (std::size_t k = 0; k < lifts_.size(); ++k) {
    const double zc = v[lifts_[k].cos_index];
    const double zs = v[lifts_[k].sin_index];
    g[static_cast<Eigen::Index>(k)] = zc * zc + zs * zs - 1.0;
  }
  return g;
}

// === Free functions =========================================================

SparsityReport sparsity_report(const Cpn1Model& model) {
  SparsityReport report;
  report.r = model.r();
  report.n_v = model.n_v();
  report.n_phi = model.n_phi();
  report.col_degrees.reserve(model.r());
  for (int rr = 0; rr < model.r(); ++rr) {
    report.col_degrees.push_back(
        static_cast<int>(model.col_support(rr).size()));
    report.nnz_s += model.col_support(rr).size();
    report.nnz_phi += model.phi_col(rr).size();
  }
  return report;
}

void check_compatible(const Cpn1Model& model, const SignalVector& v) {
  if (v.partition.get() == model.partition_ptr().get()) {
    if (v.values.size() == model.n_v()) return;
  } else if (v.partition && *v.partition == model.partition() &&
             v.values.size() == model.n_v()) {
    return;
  }
  const auto got = v.partition
                       ? std::to_string(v.partition->n_v())
                       : std::string("unbound");
  throw std::invalid_argument(
      "signal vector partition (" + got +
      " signals) does not match the model (" + std::to_string(model.n_v()) +
      " signals)");
}

}  // namespace mlstab
