#include <doctest.h>

#include <stdexcept>

#include <Eigen/Dense>

#include "mlstab/builder.hpp"
#include "mlstab/compose.hpp"
#include "mlstab/eval.hpp"

using namespace mlstab;
using Term = EquationBuilder::Term;

namespace {

/// x' = -a * x + g * u_in  (one state, one input).
Cpn1Model decay_part(const std::string& suffix, double a, double g) {
  EquationBuilder builder;
  builder.add_state("x" + suffix);
  builder.add_input("u" + suffix);
  builder.add_equation("decay" + suffix,
                       {Term(1.0, {"x" + suffix + "_dot"}),
                        Term(a, {"x" + suffix}),
                        Term(-g, {"u" + suffix})});
  return builder.build();
}

/// Algebraic gain: w = k * u  (one algebraic, one input).
Cpn1Model gain_part(const std::string& suffix, double k) {
  EquationBuilder builder;
  builder.add_input("u" + suffix);
  builder.add_algebraic("w" + suffix);
  builder.add_equation("gain" + suffix,
                       {Term(1.0, {"w" + suffix}),
                        Term(-k, {"u" + suffix})});
  return builder.build();
}

}  // namespace

TEST_SUITE("compose") {

TEST_CASE("one link reclassifies the driven input as algebraic") {
  const Cpn1Model a = decay_part("a", 2.0, 1.0);
  const Cpn1Model b = gain_part("b", 3.0);
  const Cpn1Model c = compose({a, b}, {{"xa", "ub"}});

  const SignalPartition& part = c.partition();
  CHECK(part.n == 1);
  CHECK(part.m == 1);   // ua stays free; ub is consumed by the link
  CHECK(part.q == 2);   // wb plus the reclassified ub
  CHECK(c.n_phi() == 3);  // two part equations + one link equation
  CHECK(c.r() == a.r() + b.r() + 2);

  CHECK(part.index_of("ub") == part.n_v() - 1);  // linked inputs go last
  REQUIRE(c.equation_names().size() == 3);
  CHECK(c.equation_names()[2] == "link.xa->ub");

  // At a point satisfying both parts and ub == xa the residual vanishes.
  SignalVector v = c.make_vector();
  v["xa"] = 4.0;
  v["ua"] = 0.0;
  v["xa_dot"] = -8.0;        // x' = -2 x
  v["ub"] = 4.0;             // the link
  v["wb"] = 12.0;            // w = 3 u
  CHECK(eval_residual(c, v).cwiseAbs().maxCoeff() == doctest::Approx(0.0));

  // Violating only the link changes only the link equation's row.
  v["ub"] = 5.0;
  v["wb"] = 15.0;
  const Eigen::VectorXd h = eval_residual(c, v);
  CHECK(h[0] == doctest::Approx(0.0));
  CHECK(h[2] == doctest::Approx(4.0 - 5.0));
}

TEST_CASE("chain of two links keeps the composite square") {
  const Cpn1Model a = decay_part("a", 1.0, 1.0);
  const Cpn1Model g1 = gain_part("b", 2.0);
  const Cpn1Model g2 = gain_part("c", 5.0);
  const Cpn1Model c =
      compose({a, g1, g2}, {{"xa", "ub"}, {"wb", "uc"}});

  CHECK(c.partition().n == 1);
  CHECK(c.partition().m == 1);
  CHECK(c.partition().q == 4);
  CHECK(c.big_q() == 4);

  // Unknowns (everything except inputs) match the equation count.
  CHECK(c.n_phi() == c.partition().n + c.partition().q);

  SignalVector v = c.make_vector();
  v["xa"] = 1.0;
  v["xa_dot"] = -1.0;
  v["ub"] = 1.0;
  v["wb"] = 2.0;
  v["uc"] = 2.0;
  v["wc"] = 10.0;
  CHECK(eval_residual(c, v).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("lift registrations survive composition with remapped indices") {
  EquationBuilder builder;
  builder.add_state("zc");
  builder.add_state("zs");
  builder.add_lift("zc", "zs");
  builder.add_equation("rc", {Term(1.0, {"zc_dot"}), Term(1.0, {"zs"})});
  builder.add_equation("rs", {Term(1.0, {"zs_dot"}), Term(-1.0, {"zc"})});
  const Cpn1Model rotor = builder.build();

  const Cpn1Model c = compose({decay_part("a", 1.0, 1.0), rotor}, {});
  REQUIRE(c.lifts().size() == 1);
  const SignalPartition& part = c.partition();
  CHECK(c.lifts()[0].cos_index == part.index_of("zc"));
  CHECK(c.lifts()[0].sin_index == part.index_of("zs"));

  Eigen::VectorXd v = Eigen::VectorXd::Zero(c.n_v());
  v[part.index_of("zc")] = 0.6;
  v[part.index_of("zs")] = 0.8;
  CHECK(c.lift_residual(v)[0] == doctest::Approx(0.0));
}

TEST_CASE("invalid wirings are rejected with specific errors") {
  const Cpn1Model a = decay_part("a", 1.0, 1.0);
  const Cpn1Model b = gain_part("b", 1.0);

  SUBCASE("clashing signal names") {
    CHECK_THROWS_AS((void)compose({a, a}, {}), std::invalid_argument);
  }
  SUBCASE("unknown source") {
    CHECK_THROWS_AS((void)compose({a, b}, {{"ghost", "ub"}}),
                    std::invalid_argument);
  }
  SUBCASE("unknown target") {
    CHECK_THROWS_AS((void)compose({a, b}, {{"xa", "ghost"}}),
                    std::invalid_argument);
  }
  SUBCASE("target must be an input") {
    CHECK_THROWS_AS((void)compose({a, b}, {{"xa", "wb"}}),
                    std::invalid_argument);
  }
  SUBCASE("input driven twice") {
    CHECK_THROWS_AS((void)compose({a, b}, {{"xa", "ub"}, {"xa_dot", "ub"}}),
                    std::invalid_argument);
  }
  SUBCASE("empty part list") {
    CHECK_THROWS_AS((void)compose(std::vector<Cpn1Model>{}, {}),
                    std::invalid_argument);
  }
}

}  // TEST_SUITE
