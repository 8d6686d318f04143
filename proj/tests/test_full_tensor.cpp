#include <doctest.h>

#include <random>
#include <stdexcept>

#include <Eigen/Dense>

#include "mlstab/eval.hpp"
#include "mlstab/full_tensor.hpp"
#include "random_models.hpp"

using namespace mlstab;

TEST_SUITE("full_tensor") {

TEST_CASE("expansion places monomial coefficients at the right masks") {
  // h1 = x_dot - u * w, h2 = w - 0.5 * x over v = (x_dot, x, u, w).
  SignalPartition part;
  part.n = 1;
  part.m = 1;
  part.q = 1;
  part.names = {"x_dot", "x", "u", "w"};

  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(4, 4);
  s(0, 0) = 1.0;
  s(2, 1) = 1.0;
  s(3, 1) = 1.0;
  s(3, 2) = 1.0;
  s(1, 3) = 1.0;
  Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(2, 4);
  phi(0, 0) = 1.0;
  phi(0, 1) = -1.0;
  phi(1, 2) = 1.0;
  phi(1, 3) = -0.5;
  const Cpn1Model model(part, phi, s);

  const FullTensorModel tensor = to_full_tensor(model);
  CHECK(tensor.n_phi() == 2);
  CHECK(tensor.monomial_count() == 16);

  CHECK(tensor.entry(0, 0b0001u) == doctest::Approx(1.0));   // x_dot
  CHECK(tensor.entry(0, 0b1100u) == doctest::Approx(-1.0));  // u * w
  CHECK(tensor.entry(1, 0b1000u) == doctest::Approx(1.0));   // w
  CHECK(tensor.entry(1, 0b0010u) == doctest::Approx(-0.5));  // x
  CHECK(tensor.entry(0, 0b0000u) == doctest::Approx(0.0));
  CHECK(tensor.nonzero_count() == 4);
}

TEST_CASE("fractional structure entries expand into constant plus linear") {
  // One column: phi = [2], s entry 0.25 on the only signal.  The affine
  // factor 0.75 + 0.25 v contributes a constant and a linear monomial.
  SignalPartition part;
  part.q = 1;
  part.names = {"w"};
  Eigen::MatrixXd s(1, 1);
  s(0, 0) = 0.25;
  Eigen::MatrixXd phi(1, 1);
  phi(0, 0) = 2.0;
  const Cpn1Model model(part, phi, s);

  const FullTensorModel tensor = to_full_tensor(model);
  CHECK(tensor.entry(0, 0u) == doctest::Approx(1.5));
  CHECK(tensor.entry(0, 1u) == doctest::Approx(0.5));
}

TEST_CASE("contraction reproduces the factorized residual") {
  std::mt19937 rng(101);
  for (int trial = 0; trial < 25; ++trial) {
    const Cpn1Model model = testing::make_random_model(rng);
    const FullTensorModel tensor = to_full_tensor(model);
    for (int k = 0; k < 20; ++k) {
      const SignalVector v = testing::make_random_point(model, rng);
      const Eigen::VectorXd direct = eval_residual(model, v);
      const Eigen::VectorXd via_tensor = contract_full(tensor, v);
      REQUIRE(direct.size() == via_tensor.size());
      for (Eigen::Index i = 0; i < direct.size(); ++i) {
        const double scale =
            std::max({1.0, std::abs(direct[i]), std::abs(via_tensor[i])});
        CHECK(std::abs(direct[i] - via_tensor[i]) / scale <= 1e-12);
      }
    }
  }
}

TEST_CASE("size guard rejects wide models") {
  SignalPartition part;
  part.q = 17;
  for (int i = 0; i < 17; ++i) part.names.push_back("w" + std::to_string(i));
  const Cpn1Model model(part, Eigen::MatrixXd::Zero(17, 1),
                        Eigen::MatrixXd::Zero(17, 1));
  CHECK_THROWS_AS((void)to_full_tensor(model), std::invalid_argument);
}

}  // TEST_SUITE
