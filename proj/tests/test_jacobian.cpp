#include <doctest.h>

#include <algorithm>
#include <limits>
#include <random>
#include <stdexcept>

#include <Eigen/Dense>

#include "mlstab/builder.hpp"
#include "mlstab/jacobian.hpp"
#include "random_models.hpp"

using namespace mlstab;
using Term = EquationBuilder::Term;

TEST_SUITE("jacobian") {

TEST_CASE("analytic Jacobian matches finite differences on random models") {
  std::mt19937 rng(42);
  double worst = 0.0;
  for (int k = 0; k < 30; ++k) {
    const Cpn1Model model = testing::make_random_model(rng);
    for (int j = 0; j < 5; ++j) {
      const SignalVector v = testing::make_random_point(model, rng);
      const OperatingPoint point{v};
      const JacobianResult analytic = jacobian(model, point);
      const Eigen::MatrixXd fd = testing::fd_residual_jacobian(model, v);
      const double scale = std::max(1.0, fd.cwiseAbs().maxCoeff());
      worst = std::max(worst,
                       (analytic.j - fd).cwiseAbs().maxCoeff() / scale);
    }
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("product rule is exact when one factor is zero") {
  // h = (x) * (u): at x = 0 the x-factor vanishes, yet dh/du must equal
  // x = 0 and dh/dx must equal u — the one-factor-removed product.
  EquationBuilder builder;
  builder.add_state("x");
  builder.add_input("u");
  builder.add_equation("bilinear",
                       {Term(1.0, {"x_dot"}), Term(-1.0, {"x", "u"})});
  const Cpn1Model model = builder.build();

  SignalVector v = model.make_vector();
  v["x"] = 0.0;
  v["u"] = 3.0;
  const JacobianResult result = jacobian(model, {v});
  const auto& part = model.partition();
  CHECK(result.j(0, part.index_of("x")) == doctest::Approx(-3.0));
  CHECK(result.j(0, part.index_of("u")) == doctest::Approx(0.0));
  CHECK(result.j(0, part.index_of("x_dot")) == doctest::Approx(1.0));
  CHECK(result.j.allFinite());
}

TEST_CASE("two zero factors kill every derivative of the column") {
  // h = x * u * w with x = u = 0: every partial keeps at least one zero
  // factor, so the whole gradient of that column is exactly zero.
  EquationBuilder builder;
  builder.add_state("x");
  builder.add_input("u");
  builder.add_algebraic("w");
  builder.add_equation("triple",
                       {Term(1.0, {"x_dot"}), Term(2.0, {"x", "u", "w"})});
  builder.add_equation("close", {Term(1.0, {"w"}), Term(-1.0, {"x"})});
  const Cpn1Model model = builder.build();

  SignalVector v = model.make_vector();
  v["x"] = 0.0;
  v["u"] = 0.0;
  v["w"] = 5.0;
  const JacobianResult result = jacobian(model, {v});
  const auto& part = model.partition();
  CHECK(result.j(0, part.index_of("x")) == doctest::Approx(0.0));
  CHECK(result.j(0, part.index_of("u")) == doctest::Approx(0.0));
  CHECK(result.j(0, part.index_of("w")) == doctest::Approx(0.0));
  CHECK(result.j.allFinite());

  // Cross-check the same point against finite differences.
  const Eigen::MatrixXd fd =
      testing::fd_residual_jacobian(model, v.values);
  CHECK((result.j - fd).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("column names follow the signal ordering") {
  std::mt19937 rng(9);
  const Cpn1Model model = testing::make_random_model(rng);
  const OperatingPoint point{
      model.make_vector(Eigen::VectorXd::Zero(model.n_v()))};
  const JacobianResult result = jacobian(model, point);
  CHECK(result.column_names == model.partition().names);
  CHECK(result.j.rows() == model.n_phi());
  CHECK(result.j.cols() == model.n_v());
}

#if defined(MLSTAB_HAVE_OPENMP)
TEST_CASE("serial and parallel backends agree to rounding") {
  // The parallel merge sums per-thread partials in a different grouping
  // than the serial running sum, so agreement is to rounding, not bitwise.
  std::mt19937 rng(123);
  for (int k = 0; k < 10; ++k) {
    const Cpn1Model model = testing::make_random_model(rng);
    const Eigen::VectorXd v = testing::make_random_point(model, rng);
    const OperatingPoint point{model.make_vector(v)};
    const Eigen::MatrixXd serial =
        jacobian(model, point, EvalBackend::serial).j;
    const Eigen::MatrixXd parallel =
        jacobian(model, point, EvalBackend::parallel).j;
    const double scale = std::max(1.0, serial.cwiseAbs().maxCoeff());
    CHECK((serial - parallel).cwiseAbs().maxCoeff() <= 1e-12 * scale);
  }
}
#endif

TEST_CASE("non-finite operating points are rejected") {
  std::mt19937 rng(7);
  const Cpn1Model model = testing::make_random_model(rng);
  SignalVector v = model.make_vector();
  v.values[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS((void)jacobian(model, {v}), std::invalid_argument);
}

TEST_CASE("chain rule multiplies through an inner map") {
  EquationBuilder builder;
  builder.add_state("c");
  builder.add_state("s");
  builder.add_lift("c", "s");
  builder.add_equation("rc", {Term(1.0, {"c_dot"}), Term(1.0, {"s"})});
  builder.add_equation("rs", {Term(1.0, {"s_dot"}), Term(-1.0, {"c"})});
  const Cpn1Model model = builder.build();

  SignalVector v = model.make_vector();
  v["c"] = 0.6;
  v["s"] = 0.8;
  const JacobianResult lifted = jacobian(model, {v});

  // Inner map: lifted coordinates as functions of one angle theta with
  // (c, s) = (cos, sin): column is d(v)/d(theta).
  Eigen::MatrixXd inner = Eigen::MatrixXd::Zero(model.n_v(), 1);
  const auto& part = model.partition();
  inner(part.index_of("c"), 0) = -0.8;
  inner(part.index_of("s"), 0) = 0.6;
  const Eigen::MatrixXd total = chain_rule_jacobian(lifted, inner);
  REQUIRE(total.rows() == model.n_phi());
  REQUIRE(total.cols() == 1);
  // Row rc: d(c_dot + s)/d theta = 0.6; row rs: d(s_dot - c)/d theta = 0.8.
  CHECK(total(0, 0) == doctest::Approx(0.6));
  CHECK(total(1, 0) == doctest::Approx(0.8));

  // Dimension mismatch is rejected.
  CHECK_THROWS_AS(
      (void)chain_rule_jacobian(lifted, Eigen::MatrixXd::Zero(2, 2)),
      std::invalid_argument);
}

}  // TEST_SUITE
