#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "mlstab/blocks.hpp"
#include "mlstab/builder.hpp"
#include "mlstab/eval.hpp"

using namespace mlstab;
using Term = EquationBuilder::Term;

TEST_SUITE("builder_blocks") {

TEST_CASE("sharing tags collapse identical monomials onto one column") {
  EquationBuilder builder;
  builder.add_state("a");
  builder.add_state("b");
  builder.add_equation("e1", {Term(1.0, {"a_dot"}),
                              Term(2.0, {"a", "b"}, "ab")});
  builder.add_equation("e2", {Term(1.0, {"b_dot"}),
                              Term(-1.0, {"a", "b"}, "ab")});
  CHECK(builder.column_count() == 3);  // a_dot, b_dot, one shared a*b

  const Cpn1Model model = builder.build();
  CHECK(model.r() == 3);

  SignalVector v = model.make_vector();
  v["a"] = 3.0;
  v["b"] = 4.0;
  const Eigen::VectorXd h = eval_residual(model, v);
  CHECK(h[0] == doctest::Approx(24.0));   // 2 * a * b
  CHECK(h[1] == doctest::Approx(-12.0));  // -1 * a * b

  // Without the tag the same two terms occupy two private columns.
  EquationBuilder untagged;
  untagged.add_state("a");
  untagged.add_state("b");
  untagged.add_equation("e1", {Term(1.0, {"a_dot"}), Term(2.0, {"a", "b"})});
  untagged.add_equation("e2", {Term(1.0, {"b_dot"}), Term(-1.0, {"a", "b"})});
  CHECK(untagged.column_count() == 4);
}

TEST_CASE("a sharing tag must keep one signal set") {
  EquationBuilder builder;
  builder.add_state("a");
  builder.add_state("b");
  builder.add_equation("e1", {Term(1.0, {"a_dot"}), Term(1.0, {"a"}, "t")});
  builder.add_equation("e2", {Term(1.0, {"b_dot"}), Term(1.0, {"b"}, "t")});
  CHECK_THROWS_AS((void)builder.build(), std::invalid_argument);
}

TEST_CASE("equation scale divides the row coefficients") {
  EquationBuilder scaled;
  scaled.add_state("x");
  scaled.add_equation("e", {Term(4.0, {"x_dot"}), Term(8.0, {"x"})}, 4.0);
  const Cpn1Model model = scaled.build();

  SignalVector v = model.make_vector();
  v["x"] = 1.0;
  v["x_dot"] = 0.0;
  CHECK(eval_residual(model, v)[0] == doctest::Approx(2.0));  // 8/4 * x
}

TEST_CASE("constant terms use an all-ones factor column") {
  EquationBuilder builder;
  builder.add_state("x");
  builder.add_equation("e", {Term(1.0, {"x_dot"}), Term(1.0, {"x"}),
                             Term(-5.0, {})});
  const Cpn1Model model = builder.build();
  SignalVector v = model.make_vector();
  v["x"] = 2.0;
  CHECK(eval_residual(model, v)[0] == doctest::Approx(-3.0));
}

TEST_CASE("builder rejects malformed inputs") {
  SUBCASE("duplicate signal name") {
    EquationBuilder builder;
    builder.add_state("x");
    CHECK_THROWS_AS(builder.add_input("x"), std::invalid_argument);
  }
  SUBCASE("derivative name collision caught at build time") {
    EquationBuilder builder;
    builder.add_input("x_dot");
    builder.add_state("x");  // registers a second signal also named x_dot
    builder.add_equation("e", {Term(1.0, {"x"})});
    CHECK_THROWS_AS((void)builder.build(), std::invalid_argument);
  }
  SUBCASE("unknown signal in a term") {
    EquationBuilder builder;
    builder.add_state("x");
    builder.add_equation("e", {Term(1.0, {"x_dot"}), Term(1.0, {"ghost"})});
    CHECK_THROWS_AS((void)builder.build(), std::invalid_argument);
  }
  SUBCASE("repeated signal within a term") {
    EquationBuilder builder;
    builder.add_state("x");
    builder.add_equation("e", {Term(1.0, {"x_dot"}), Term(1.0, {"x", "x"})});
    CHECK_THROWS_AS((void)builder.build(), std::invalid_argument);
  }
  SUBCASE("lift of a non-state") {
    EquationBuilder builder;
    builder.add_state("c");
    builder.add_input("s");
    CHECK_THROWS_AS(builder.add_lift("c", "s"), std::invalid_argument);
  }
  SUBCASE("no equations") {
    EquationBuilder builder;
    builder.add_state("x");
    CHECK_THROWS_AS((void)builder.build(), std::invalid_argument);
  }
  SUBCASE("empty equation") {
    EquationBuilder builder;
    builder.add_state("x");
    CHECK_THROWS_AS(builder.add_equation("e", {}), std::invalid_argument);
  }
}

TEST_CASE("lifted PLL block has the documented shape") {
  const Cpn1Model model = pll_block(default_params());
  CHECK(model.partition().n == 3);
  CHECK(model.partition().m == 2);
  CHECK(model.partition().q == 2);
  CHECK(model.n_phi() == 5);
  CHECK(model.r() == 15);
  REQUIRE(model.lifts().size() == 1);

  // Locked onto a pure d-axis voltage the PLL rests: every residual is zero.
  SignalVector v = model.make_vector();
  v["z1"] = 1.0;
  v["alpha1"] = 1.0;
  v["u1"] = 326.0;
  CHECK(eval_residual(model, v).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("default parameters derive the network quantities") {
  const BlockParams p = default_params();
  CHECK(p.omega_b == doctest::Approx(2.0 * 3.14159265358979 * 50.0));
  CHECK(p.v_peak == doctest::Approx(230e3 * std::sqrt(2.0 / 3.0)));
  CHECK(p.r_f == doctest::Approx(10.58));
  CHECK(p.l_f == doctest::Approx(0.07 * 529.0 / p.omega_b));
  const double z_th = 529.0 / 5.0;
  CHECK(p.r_g == doctest::Approx(z_th / std::sqrt(101.0)));
  CHECK(p.l_g == doctest::Approx(10.0 * p.r_g / p.omega_b));
  CHECK(p.r_load == doctest::Approx(661.25));
  CHECK(p.v_ref == doctest::Approx(p.v_peak));
  CHECK(p.r_kl == doctest::Approx(p.r_g));
  CHECK(p.omega_g == doctest::Approx(p.omega_b));
}

TEST_CASE("parameter JSON round trips and rejects junk") {
  BlockParams p = default_params();
  p.p_ref = 0.7;
  p.k_d = -50.0;
  const BlockParams q = params_from_json(params_to_json(p));
  CHECK(q.p_ref == doctest::Approx(0.7));
  CHECK(q.k_d == doctest::Approx(-50.0));
  CHECK(q.r_load == doctest::Approx(p.r_load));
  CHECK(params_to_json(q) == params_to_json(p));

  CHECK_THROWS_AS((void)params_from_json("{\"bogus_gain\": 1.0}"),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)params_from_json("{\"k_d\": \"fast\"}"),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)params_from_json("[1, 2]"), std::invalid_argument);

  // Partial files override only the listed fields.
  const BlockParams partial = params_from_json("{\"h\": 2.5}");
  CHECK(partial.h == doctest::Approx(2.5));
  CHECK(partial.r_load == doctest::Approx(661.25));
}

TEST_CASE("polynomial lifting inserts copy variables") {
  const Cpn1Model model = lift_polynomial({{"x", 2}});
  CHECK(model.partition().n == 1);
  CHECK(model.partition().q == 1);  // x_copy1
  CHECK(model.n_phi() == 2);

  // x' = x^2 holds on the manifold copy = x: at x = 3, x_dot = 9.
  SignalVector v = model.make_vector();
  v["x"] = 3.0;
  v["x_copy1"] = 3.0;
  v["x_dot"] = 9.0;
  CHECK(eval_residual(model, v).cwiseAbs().maxCoeff() == doctest::Approx(0.0));

  CHECK_THROWS_AS((void)lift_polynomial({}), std::invalid_argument);
  CHECK_THROWS_AS((void)lift_polynomial({{"x", -1}}), std::invalid_argument);
  CHECK_THROWS_AS((void)lift_polynomial({{"x", 0}}), std::invalid_argument);
}

TEST_CASE("trigonometric lifting turns an angle into circle dynamics") {
  TrigLift lift;
  lift.angle_name = "th";
  lift.cos_name = "zc";
  lift.sin_name = "zs";

  // Rate from a free input: no copies needed.
  const Cpn1Model simple = lift_trig(lift, {Term(1.0, {"w"})});
  CHECK(simple.partition().n == 2);
  CHECK(simple.partition().m == 1);
  CHECK(simple.partition().q == 0);
  REQUIRE(simple.lifts().size() == 1);

  SignalVector v = simple.make_vector();
  v["zc"] = 0.6;
  v["zs"] = 0.8;
  v["w"] = 2.0;
  v["zc_dot"] = -1.6;  // -(w) zs
  v["zs_dot"] = 1.2;   // +(w) zc
  CHECK(eval_residual(simple, v).cwiseAbs().maxCoeff() == doctest::Approx(0.0));

  // A rate touching the lift states forces copy variables.
  const Cpn1Model fed_back = lift_trig(lift, {Term(1.0, {"zc"})});
  CHECK(fed_back.partition().q == 2);
  CHECK(fed_back.n_phi() == 4);

  CHECK_THROWS_AS((void)lift_trig(lift, {Term(1.0, {"w", "w"})}),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)lift_trig(lift, {}), std::invalid_argument);
}

TEST_CASE("rotation block realizes the frame difference identities") {
  TrigLift local;
  local.cos_name = "lc";
  local.sin_name = "ls";
  TrigLift global_frame;
  global_frame.cos_name = "gc";
  global_frame.sin_name = "gs";

  const Cpn1Model model = rotation_block(local, global_frame);
  CHECK(model.partition().m == 6);
  CHECK(model.partition().q == 4);
  CHECK(model.n_phi() == 4);

  const double a = 30.0 * 3.14159265358979 / 180.0;
  const double g = 10.0 * 3.14159265358979 / 180.0;
  SignalVector v = model.make_vector();
  v["lc"] = std::cos(a);
  v["ls"] = std::sin(a);
  v["gc"] = std::cos(g);
  v["gs"] = std::sin(g);
  v["v_D"] = 1.0;
  v["v_Q"] = 2.0;
  v["h1"] = std::cos(a - g);
  v["h2"] = std::sin(a - g);
  v["v_d"] = std::cos(a - g) * 1.0 + std::sin(a - g) * 2.0;
  v["v_q"] = -std::sin(a - g) * 1.0 + std::cos(a - g) * 2.0;
  CHECK(eval_residual(model, v).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("every library block builds by name") {
  const BlockParams params = default_params();
  const std::vector<std::string> names = block_names();
  CHECK(names.size() >= 7);
  for (const std::string& name : names) {
    const Cpn1Model model = block_by_name(name, params);
    CHECK(model.n_v() > 0);
    CHECK(model.n_phi() > 0);
  }
  CHECK(std::find(names.begin(), names.end(), "pll") != names.end());
  CHECK_THROWS_AS((void)block_by_name("flux_capacitor", params),
                  std::invalid_argument);
}

TEST_CASE("individual blocks expose their documented interfaces") {
  const BlockParams params = default_params();

  const Cpn1Model vsm = vsm_block(params);
  CHECK(vsm.partition().n == 4);
  CHECK(vsm.partition().has("omega_vsm"));
  CHECK(vsm.lifts().size() == 1);

  const Cpn1Model droop = droop_q_block(params);
  CHECK(droop.partition().n == 1);
  CHECK(droop.partition().p == 1);
  CHECK(droop.partition().has("v_d_star"));

  const Cpn1Model cc = current_control_block(params);
  CHECK(cc.partition().n == 2);
  CHECK(cc.partition().p == 2);

  CHECK_THROWS_AS((void)vsm_block([] {
                    BlockParams bad = default_params();
                    bad.h = 0.0;
                    return bad;
                  }()),
                  std::invalid_argument);
}

}  // TEST_SUITE
