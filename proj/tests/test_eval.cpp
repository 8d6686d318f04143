#include <doctest.h>

#include <algorithm>
#include <random>

#include <Eigen/Dense>

#include "mlstab/eval.hpp"
#include "mlstab/model.hpp"
#include "random_models.hpp"

using namespace mlstab;

namespace {

/// h1 = x_dot - u * w, h2 = w - 0.5 * x over v = (x_dot, x, u, w); one
/// fractional-coefficient column is appended to h2 to exercise the affine
/// factor normalization: s_4 = (1 - 0.25 + 0.25 * x).
Cpn1Model affine_model() {
  SignalPartition part;
  part.n = 1;
  part.m = 1;
  part.q = 1;
  part.names = {"x_dot", "x", "u", "w"};

  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(4, 5);
  s(0, 0) = 1.0;
  s(2, 1) = 1.0;
  s(3, 1) = 1.0;
  s(3, 2) = 1.0;
  s(1, 3) = 1.0;
  s(1, 4) = 0.25;

  Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(2, 5);
  phi(0, 0) = 1.0;
  phi(0, 1) = -1.0;
  phi(1, 2) = 1.0;
  phi(1, 3) = -0.5;
  phi(1, 4) = 2.0;
  return Cpn1Model(part, phi, s);
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("factor vector follows the affine normalization") {
  const Cpn1Model model = affine_model();
  SignalVector v = model.make_vector();
  v["x_dot"] = 3.0;
  v["x"] = 2.0;
  v["u"] = -1.0;
  v["w"] = 4.0;

  const Eigen::VectorXd s = eval_factors(model, v);
  REQUIRE(s.size() == 5);
  CHECK(s[0] == doctest::Approx(3.0));        // x_dot
  CHECK(s[1] == doctest::Approx(-4.0));       // u * w
  CHECK(s[2] == doctest::Approx(4.0));        // w
  CHECK(s[3] == doctest::Approx(2.0));        // x
  // 1 - |0.25| + 0.25 * x = 0.75 + 0.5
  CHECK(s[4] == doctest::Approx(1.25));
}

TEST_CASE("residual equals phi times the factor vector") {
  const Cpn1Model model = affine_model();
  std::mt19937 rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const SignalVector v = testing::make_random_point(model, rng);
    const Eigen::VectorXd s = eval_factors(model, v);
    const Eigen::VectorXd h = eval_residual(model, v);
    const Eigen::VectorXd expect = model.phi() * s;
    CHECK((h - expect).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
  }
}

TEST_CASE("hand-computed residual values") {
  const Cpn1Model model = affine_model();
  SignalVector v = model.make_vector();
  v["x_dot"] = 8.0;
  v["x"] = 2.0;
  v["u"] = 2.0;
  v["w"] = 4.0;

  const Eigen::VectorXd h = eval_residual(model, v);
  REQUIRE(h.size() == 2);
  // h1 = 8 - 2 * 4 = 0
  CHECK(h[0] == doctest::Approx(0.0));
  // h2 = 4 - 0.5 * 2 + 2 * (0.75 + 0.25 * 2) = 3 + 2.5
  CHECK(h[1] == doctest::Approx(5.5));
}

TEST_CASE("raw-buffer evaluation matches the checked interface") {
  const Cpn1Model model = affine_model();
  std::mt19937 rng(11);
  const SignalVector v = testing::make_random_point(model, rng);
  Eigen::VectorXd out(model.n_phi());
  eval_residual_into(model, v.values, out);
  CHECK((out - eval_residual(model, v)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("backends agree") {
  // Small models route the automatic backend to the serial kernel, so that
  // comparison is bitwise.  The parallel kernel merges per-thread partial
  // sums in a different grouping, so it only agrees to rounding.
  std::mt19937 rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    const Cpn1Model model = testing::make_random_model(rng);
    const SignalVector v = testing::make_random_point(model, rng);
    const Eigen::VectorXd serial =
        eval_residual(model, v, EvalBackend::serial);
    const Eigen::VectorXd automatic =
        eval_residual(model, v, EvalBackend::automatic);
    CHECK((serial - automatic).cwiseAbs().maxCoeff() == 0.0);
#if defined(MLSTAB_HAVE_OPENMP)
    const Eigen::VectorXd parallel =
        eval_residual(model, v, EvalBackend::parallel);
    const double scale = std::max(1.0, serial.cwiseAbs().maxCoeff());
    CHECK((serial - parallel).cwiseAbs().maxCoeff() <= 1e-12 * scale);
#endif
  }
}

TEST_CASE("empty model evaluates to an empty residual") {
  const Cpn1Model empty;
  const SignalVector v = empty.make_vector();
  CHECK(eval_residual(empty, v).size() == 0);
  CHECK(eval_factors(empty, v).size() == 0);
}

TEST_CASE("incompatible vectors are rejected") {
  const Cpn1Model model = affine_model();
  const Cpn1Model empty;
  CHECK_THROWS_AS((void)eval_residual(model, empty.make_vector()),
                  std::invalid_argument);
}

}  // TEST_SUITE
