#include "mlstab/jacobian.hpp"

#include <cmath>
#include <stdexcept>

#if defined(MLSTAB_HAVE_OPENMP)
#include <omp.h>
#endif

namespace mlstab {

namespace {

/// Accumulates the contributions of columns [r_begin, r_end) into `j`.
void accumulate_columns(const Cpn1Model& model, const Eigen::VectorXd& v,
                        int r_begin, int r_end, Eigen::MatrixXd& j,
                        std::vector<double>& prefix,
                        std::vector<double>& suffix) {
  const auto& s = model.s_struct();
  for (int r = r_begin; r < r_end; ++r) {
    const auto support = model.col_support(r);
    const int deg = static_cast<int>(support.size());
    if (deg == 0) continue;  // constant column: no derivative
    const auto phi_col = model.phi_col(r);
    if (phi_col.empty()) continue;

    if (static_cast<int>(prefix.size()) < deg + 1) {
      prefix.resize(deg + 1);
      suffix.resize(deg + 1);
    }
    // prefix[j] = f_0 ... f_{j-1};  suffix[j] = f_j ... f_{deg-1}.
    prefix[0] = 1.0;
    for (int k = 0; k < deg; ++k) {
      const int i = support[k];
      const double s_ir = s(i, r);
      const double f = 1.0 - std::abs(s_ir) + s_ir * v[i];
      prefix[k + 1] = prefix[k] * f;
      suffix[k] = f;  // stash the factor, turned into a suffix product below
    }
    suffix[deg] = 1.0;
    for (int k = deg - 1; k >= 0; --k) {
      suffix[k] = suffix[k] * suffix[k + 1];
    }

    for (int k = 0; k < deg; ++k) {
      const int i = support[k];
      const double partial = s(i, r) * prefix[k] * suffix[k + 1];
      if (partial == 0.0) continue;
      for (const auto& entry : phi_col) {
        j(entry.row, i) += entry.value * partial;
      }
    }
  }
}

}  // namespace

JacobianResult jacobian(const Cpn1Model& model, const OperatingPoint& point,
                        EvalBackend backend) {
  check_compatible(model, point.v_bar);
  if (!point.v_bar.values.allFinite()) {
    throw std::invalid_argument("jacobian: operating point is not finite");
  }
  const Eigen::VectorXd& v = point.v_bar.values;
  const int r_count = model.r();

  JacobianResult result;
  result.j = Eigen::MatrixXd::Zero(model.n_phi(), model.n_v());
  result.point = point;
  result.column_names = model.partition().names;

  bool parallel = false;
#if defined(MLSTAB_HAVE_OPENMP)
  parallel = backend == EvalBackend::parallel ||
             (backend == EvalBackend::automatic && r_count >= 4096 &&
              effective_threads() > 1);
#else
  if (backend == EvalBackend::parallel) {
    throw std::runtime_error("parallel backend requested but this build has "
                             "no OpenMP support");
  }
#endif

  if (parallel) {
#if defined(MLSTAB_HAVE_OPENMP)
    const int nth = effective_threads();
    std::vector<Eigen::MatrixXd> partial(
        nth, Eigen::MatrixXd::Zero(model.n_phi(), model.n_v()));
#pragma omp parallel num_threads(nth)
    {
      const int t = omp_get_thread_num();
      std::vector<double> prefix, suffix;
      const int chunk = (r_count + nth - 1) / nth;
      const int begin = std::min(r_count, t * chunk);
      const int end = std::min(r_count, begin + chunk);
      accumulate_columns(model, v, begin, end, partial[t], prefix, suffix);
    }
    for (int t = 0; t < nth; ++t) result.j += partial[t];
#endif
  } else {
    std::vector<double> prefix, suffix;
    accumulate_columns(model, v, 0, r_count, result.j, prefix, suffix);
  }

#if defined(MLSTAB_DEBUG_COUNTERS)
  debug_counters().jacobian_column_passes += r_count;
#endif
  return result;
}

Eigen::MatrixXd chain_rule_jacobian(const JacobianResult& j_lift,
                                    const Eigen::MatrixXd& j_inner) {
  if (j_lift.j.cols() != j_inner.rows()) {
    throw std::invalid_argument(
        "chain rule: lift Jacobian has " + std::to_string(j_lift.j.cols()) +
        " columns but the inner Jacobian has " +
        std::to_string(j_inner.rows()) + " rows");
  }
  return j_lift.j * j_inner;
}

}  // namespace mlstab
