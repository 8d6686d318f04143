// ============================================================================
// bench_kernels.cpp — micro-benchmarks of the evaluation and linearization
// kernels on the benchmark network (165 factor columns), comparing the serial
// reference implementation against the OpenMP-parallel path.
// ============================================================================
#include <benchmark/benchmark.h>

#include "mlstab/bench3bus.hpp"
#include "mlstab/eval.hpp"
#include "mlstab/jacobian.hpp"

namespace {

using namespace mlstab;

const NetworkCase& network() {
  static const NetworkCase value = assemble_3bus(bench_params());
  return value;
}

const OperatingPoint& point() {
  static const OperatingPoint value = find_equilibrium(network());
  return value;
}

void bm_eval_residual_serial(benchmark::State& state) {
  const Cpn1Model& model = network().model;
  const SignalVector& v = point().v_bar;
  for (auto _ : state) {
    benchmark::DoNotOptimize(eval_residual(model, v, EvalBackend::serial));
  }
}
BENCHMARK(bm_eval_residual_serial);

void bm_eval_residual_parallel(benchmark::State& state) {
  const Cpn1Model& model = network().model;
  const SignalVector& v = point().v_bar;
  for (auto _ : state) {
    benchmark::DoNotOptimize(eval_residual(model, v, EvalBackend::parallel));
  }
}
BENCHMARK(bm_eval_residual_parallel);

void bm_jacobian_serial(benchmark::State& state) {
  const Cpn1Model& model = network().model;
  for (auto _ : state) {
    benchmark::DoNotOptimize(jacobian(model, point(), EvalBackend::serial));
  }
}
BENCHMARK(bm_jacobian_serial);

void bm_jacobian_parallel(benchmark::State& state) {
  const Cpn1Model& model = network().model;
  for (auto _ : state) {
    benchmark::DoNotOptimize(jacobian(model, point(), EvalBackend::parallel));
  }
}
BENCHMARK(bm_jacobian_parallel);

}  // namespace

BENCHMARK_MAIN();
