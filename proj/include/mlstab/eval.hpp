#pragma once

// ============================================================================
// mlstab/eval.hpp
//
// Evaluation kernels for CPN1 models: the factor vector s(v) and the residual
// h(v) = Phi * s(v).  Each kernel has a serial reference implementation and an
// OpenMP-parallel one; results agree to rounding because the parallel merge
// runs in fixed thread order.
// ============================================================================

#include <Eigen/Dense>

#include "mlstab/model.hpp"

namespace mlstab {

/// Kernel selection.  `automatic` picks the parallel path only for models
/// large enough to amortize the fork/join cost.
enum class EvalBackend { automatic, serial, parallel };

/// Worker-pool cap honoring the MLSTAB_THREADS environment variable.
[[nodiscard]] int effective_threads();

/// s_r(v) = prod_i (1 - |S_ir| + S_ir v_i) for every column r.
[[nodiscard]] Eigen::VectorXd eval_factors(
    const Cpn1Model& model, const SignalVector& v,
    EvalBackend backend = EvalBackend::automatic);

/// h(v) = Phi * s(v); zero iff the point is consistent.
[[nodiscard]] Eigen::VectorXd eval_residual(
    const Cpn1Model& model, const SignalVector& v,
    EvalBackend backend = EvalBackend::automatic);

/// Raw-buffer variant used by hot loops that maintain their own vectors; `v`
/// must have N_v entries and `out` N_phi entries.
void eval_residual_into(const Cpn1Model& model, const Eigen::VectorXd& v,
                        Eigen::VectorXd& out,
                        EvalBackend backend = EvalBackend::automatic);

#if defined(MLSTAB_DEBUG_COUNTERS)
/// Debug instrumentation: structural passes performed by eval/jacobian calls
/// on this thread since the last reset.  Compiled out in release builds.
struct DebugCounters {
  long eval_column_passes = 0;
  long jacobian_column_passes = 0;
};
[[nodiscard]] DebugCounters& debug_counters();
void reset_debug_counters();
#endif

}  // namespace mlstab
