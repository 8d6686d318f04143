#include "mlstab/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>

#if defined(MLSTAB_HAVE_OPENMP)
#include <omp.h>
#endif

namespace mlstab {

namespace {

// Column count below which the serial path wins even with OpenMP available.
constexpr int kParallelThreshold = 4096;

[[nodiscard]] bool use_parallel(const Cpn1Model& model, EvalBackend backend) {
#if defined(MLSTAB_HAVE_OPENMP)
  switch (backend) {
    case EvalBackend::serial:
      return false;
    case EvalBackend::parallel:
      return true;
    case EvalBackend::automatic:
      return model.r() >= kParallelThreshold && effective_threads() > 1;
  }
  return false;
#else
  (void)model;
  if (backend == EvalBackend::parallel) {
    throw std::runtime_error("parallel backend requested but this build has "
                             "no OpenMP support");
  }
  return false;
#endif
}

/// Product of the affine factors of column r at v.
[[nodiscard]] inline double column_factor_product(const Cpn1Model& model,
                                                  const Eigen::VectorXd& v,
                                                  int r) {
  const auto& s = model.s_struct();
  double prod = 1.0;
  for (const auto i : model.col_support(r)) {
    const double s_ir = s(i, r);
    prod *= 1.0 - std::abs(s_ir) + s_ir * v[i];
  }
  return prod;
}

}  // namespace

int effective_threads() {
#if defined(MLSTAB_HAVE_OPENMP)
  int max_threads = omp_get_max_threads();
  if (const char* env = std::getenv("MLSTAB_THREADS")) {
    const int cap = std::atoi(env);
    if (cap > 0) max_threads = std::min(max_threads, cap);
  }
  return std::max(1, max_threads);
#else
  return 1;
#endif
}

#if defined(MLSTAB_DEBUG_COUNTERS)
DebugCounters& debug_counters() {
  thread_local DebugCounters counters;
  return counters;
}
void reset_debug_counters() { debug_counters() = DebugCounters{}; }
#endif

Eigen::VectorXd eval_factors(const Cpn1Model& model, const SignalVector& v,
                             EvalBackend backend) {
  check_compatible(model, v);
  const int r_count = model.r();
  Eigen::VectorXd s(r_count);
  const Eigen::VectorXd& values = v.values;
  if (use_parallel(model, backend)) {
#if defined(MLSTAB_HAVE_OPENMP)
#pragma omp parallel for schedule(static) num_threads(effective_threads())
    for (int r = 0; r < r_count; ++r) {
      s[r] = column_factor_product(model, values, r);
    }
#endif
  } else {
    for (int r = 0; r < r_count; ++r) {
      s[r] = column_factor_product(model, values, r);
    }
  }
#if defined(MLSTAB_DEBUG_COUNTERS)
  debug_counters().eval_column_passes += r_count;
#endif
  return s;
}

Eigen::VectorXd eval_residual(const Cpn1Model& model, const SignalVector& v,
                              EvalBackend backend) {
  check_compatible(model, v);
  Eigen::VectorXd out(model.n_phi());
  eval_residual_into(model, v.values, out, backend);
  return out;
}

void eval_residual_into(const Cpn1Model& model, const Eigen::VectorXd& v,
                        Eigen::VectorXd& out, EvalBackend backend) {
  if (v.size() != model.n_v()) {
    throw std::invalid_argument(
        "residual evaluation: vector has " + std::to_string(v.size()) +
        " entries, expected " + std::to_string(model.n_v()));
  }
  if (out.size() != model.n_phi()) out.resize(model.n_phi());
  out.setZero();
  const int r_count = model.r();

  if (use_parallel(model, backend)) {
#if defined(MLSTAB_HAVE_OPENMP)
    const int nth = effective_threads();
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(model.n_phi(), nth);
#pragma omp parallel num_threads(nth)
    {
      const int t = omp_get_thread_num();
      auto col = acc.col(t);
#pragma omp for schedule(static)
      for (int r = 0; r < r_count; ++r) {
        const double s_r = column_factor_product(model, v, r);
        for (const auto& entry : model.phi_col(r)) {
          col[entry.row] += entry.value * s_r;
        }
      }
    }
    // Fixed-order merge keeps results deterministic for a given thread count.
    for (int t = 0; t < nth; ++t) out += acc.col(t);
#endif
  } else {
    for (int r = 0; r < r_count; ++r) {
      const double s_r = column_factor_product(model, v, r);
      for (const auto& entry : model.phi_col(r)) {
        out[entry.row] += entry.value * s_r;
      }
    }
  }
#if defined(MLSTAB_DEBUG_COUNTERS)
  debug_counters().eval_column_passes += r_count;
#endif
}

}  // namespace mlstab
