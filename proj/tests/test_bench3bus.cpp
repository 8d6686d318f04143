#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "mlstab/bench3bus.hpp"
#include "mlstab/eval.hpp"
#include "mlstab/gep.hpp"
#include "mlstab/ldss.hpp"

using namespace mlstab;

TEST_SUITE("bench3bus") {

TEST_CASE("full assembly has the documented structural counts") {
  const NetworkCase network = assemble_3bus(bench_params());
  const SignalPartition& part = network.model.partition();
  CHECK(part.n == 26);
  CHECK(part.m == 6);
  CHECK(part.p == 0);
  CHECK(part.q == 32);
  CHECK(network.model.n_phi() == 58);
  CHECK(network.model.r() == 165);
  CHECK(network.z_gfm.size() == 9);
  CHECK(network.z_gfl.size() == 9);
  CHECK(network.z_grid.size() == 8);
  CHECK(network.u_names.size() == 6);
  for (const std::string& s : network.z_gfm) CHECK(part.has(s));
  for (const std::string& s : network.z_grid) CHECK(part.has(s));
}

TEST_CASE("single-converter sub-assemblies carry their own counts") {
  const NetworkCase gfm = assemble_3bus(bench_params(), Subsystem::gfm_only);
  CHECK(gfm.model.partition().n == 16);
  CHECK(gfm.model.n_phi() == 33);
  CHECK(gfm.model.r() == 87);
  CHECK(gfm.z_gfm.size() == 9);
  CHECK(gfm.z_gfl.empty());

  const NetworkCase gfl = assemble_3bus(bench_params(), Subsystem::gfl_only);
  CHECK(gfl.model.partition().n == 15);
  CHECK(gfl.model.n_phi() == 32);
  CHECK(gfl.model.r() == 95);
  CHECK(gfl.z_gfl.size() == 9);
  CHECK(gfl.z_gfm.empty());
}

TEST_CASE("subsystem names parse") {
  CHECK(subsystem_from_string("full") == Subsystem::full);
  CHECK(subsystem_from_string("gfm_only") == Subsystem::gfm_only);
  CHECK(subsystem_from_string("gfl_only") == Subsystem::gfl_only);
  CHECK_THROWS_AS((void)subsystem_from_string("half"), std::invalid_argument);
}

TEST_CASE("equilibrium is consistent and balances power") {
  const NetworkCase network = assemble_3bus(bench_params());
  const OperatingPoint point = find_equilibrium(network);

  const Eigen::VectorXd h = eval_residual(network.model, point.v_bar);
  CHECK(h.lpNorm<Eigen::Infinity>() <= 1e-8);
  const SignalPartition& part = network.model.partition();
  CHECK(point.v_bar.values.head(part.n).lpNorm<Eigen::Infinity>() <= 1e-8);
  CHECK(power_balance_error(network, point.v_bar) < 1e-6);
}

TEST_CASE("both converters share the dispatched active power") {
  const NetworkCase network = assemble_3bus(bench_params());
  const OperatingPoint point = find_equilibrium(network);
  // Measured powers sit on their references at equilibrium; both converters
  // get the same reference, so the per-unit measurements agree.
  const double p_m = point.v_bar["p_m"] / network.params.s_b;
  const double p_l = point.v_bar["p_l"] / network.params.s_b;
  CHECK(p_m == doctest::Approx(network.params.p_ref).epsilon(1e-6));
  CHECK(p_l == doctest::Approx(network.params.p_ref).epsilon(1e-6));
}

TEST_CASE("descriptor extraction sees 26 dynamic and 32 algebraic modes") {
  const NetworkCase network = assemble_3bus(bench_params());
  const OperatingPoint point = find_equilibrium(network);
  const DescriptorSystem sys = extract_ldss(network.model, point);
  CHECK(sys.dim() == 58);

  Eigen::FullPivLU<Eigen::MatrixXd> lu(sys.e);
  CHECK(lu.rank() == 26);

  const GepSolution sol = generalized_eig(sys);
  CHECK(sol.finite.size() == 26);
  CHECK(sol.infinite_count == 32);

  const StabilityVerdict verdict = stability_verdict(sol, 1e-3);
  CHECK(verdict.stable);
  CHECK_FALSE(verdict.marginal);
  // Slow swing pair around -7.59 +- 257i rad/s governs the margin.
  CHECK(verdict.margin == doctest::Approx(-7.59).epsilon(0.01));
  const bool has_swing_pair =
      std::any_of(sol.finite.begin(), sol.finite.end(),
                  [](const std::complex<double>& lambda) {
                    return std::abs(lambda.real() + 7.59) < 0.1 &&
                           std::abs(std::abs(lambda.imag()) - 257.0) < 1.0;
                  });
  CHECK(has_swing_pair);
}

TEST_CASE("scenario catalogue") {
  const std::vector<std::string> names = scenario_names();
  REQUIRE(names.size() == 3);
  for (const std::string& name : names) {
    const Scenario sc = make_scenario(name);
    CHECK(sc.name == name);
    CHECK(sc.t_begin < sc.t_linearize);
    CHECK(sc.t_linearize < sc.t_end);
    CHECK(sc.dt > 0.0);
  }
  const Scenario small = make_scenario("small-step");
  REQUIRE(small.structure_events.size() == 1);
  CHECK(small.structure_events[0].r_load_factor < 1.0);
  CHECK(small.structure_events[0].r_load_factor > 0.9);

  const Scenario large = make_scenario("large-step");
  CHECK(large.structure_events.size() == 2);

  const Scenario hopf = make_scenario("hopf");
  CHECK(hopf.structure_events.empty());
  CHECK(hopf.input_schedule.size() >= 2);

  CHECK_THROWS_AS((void)make_scenario("nothing"), std::invalid_argument);
}

TEST_CASE("classical-model translation of the equilibrium is stationary") {
  const NetworkCase network = assemble_3bus(bench_params());
  const OperatingPoint point = find_equilibrium(network);
  const Eigen::VectorXd x0 = nti_state_from_point(network, point);
  REQUIRE(x0.size() == NtiModel::kStates);

  NtiModel nti;
  nti.params = network.params;
  nti.u = reference_inputs(network.params);
  const Eigen::VectorXd xdot = nti.rhs(x0);
  // Normalize per state family: angles/speeds O(1), currents O(1e3).
  double worst = 0.0;
  for (Eigen::Index i = 0; i < xdot.size(); ++i) {
    worst = std::max(worst,
                     std::abs(xdot[i]) / std::max(1.0, std::abs(x0[i])));
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("short simulation holds the equilibrium") {
  const NetworkCase network = assemble_3bus(bench_params());
  const OperatingPoint point = find_equilibrium(network);

  SolverConfig config;
  config.max_step = 1e-4;
  const Trajectory traj =
      simulate(network.model, point.v_bar, {}, 0.0, 0.01, config);
  REQUIRE(traj.completed);

  const Eigen::VectorXd first = traj.at(0);
  const Eigen::VectorXd last = traj.at(traj.size() - 1);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < first.size(); ++i) {
    worst = std::max(worst, std::abs(last[i] - first[i]) /
                                std::max(1.0, std::abs(first[i])));
  }
  CHECK(worst < 1e-7);
}

TEST_CASE("a stable two-point sweep reports no crossing") {
  const std::vector<double> grid = {0.4, 0.5};
  const SweepResult sweep = bifurcation_sweep(bench_params(), grid);
  REQUIRE(sweep.points.size() == 2);
  CHECK_FALSE(sweep.crossing_found);
  CHECK_FALSE(sweep.truncated);
  CHECK(sweep.last_feasible == doctest::Approx(0.5));
  for (const SweepPoint& point : sweep.points) {
    CHECK(point.feasible);
    CHECK(point.verdict.stable);
    CHECK(point.dominant_re < 0.0);
    CHECK(point.dominant_im > 0.0);
  }

  const std::string json = sweep_to_json(sweep);
  CHECK(json.find("\"crossing_found\": false") != std::string::npos);
  CHECK(json.find("\"points\"") != std::string::npos);
  CHECK(json.find("\"last_feasible\"") != std::string::npos);
}

}  // TEST_SUITE
