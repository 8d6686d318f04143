#pragma once

// ============================================================================
// random_models.hpp — seeded generator of small random CPN1 models and
// evaluation points, shared by the unit tests and the acceptance checks.
// ============================================================================

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mlstab/eval.hpp"
#include "mlstab/model.hpp"

namespace mlstab::testing {

/// Random model with N_v <= max_nv and R <= max_r.  Columns mix unit entries
/// (factors that can vanish at integer points) with generic fractional ones,
/// support sizes 1..3, and sparse Phi columns, which covers every structural
/// case the evaluation and differentiation kernels distinguish.
[[nodiscard]] inline Cpn1Model make_random_model(std::mt19937& rng,
                                                 int max_nv = 10,
                                                 int max_r = 20) {
  std::uniform_int_distribution<int> n_dist(1, 3);
  SignalPartition part;
  part.n = n_dist(rng);
  part.m = std::uniform_int_distribution<int>(0, 2)(rng);
  const int room = max_nv - 2 * part.n - part.m;
  part.q = std::uniform_int_distribution<int>(0, std::max(0, room))(rng);

  for (int i = 0; i < part.n; ++i)
    part.names.push_back("x" + std::to_string(i) + "_dot");
  for (int i = 0; i < part.n; ++i)
    part.names.push_back("x" + std::to_string(i));
  for (int i = 0; i < part.m; ++i)
    part.names.push_back("u" + std::to_string(i));
  for (int i = 0; i < part.q; ++i)
    part.names.push_back("w" + std::to_string(i));

  const int n_v = part.n_v();
  const int n_phi = part.n + part.q;
  const int r =
      std::uniform_int_distribution<int>(1, std::max(1, max_r))(rng);

  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(n_v, r);
  Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(n_phi, r);
  std::uniform_real_distribution<double> coeff(-2.0, 2.0);
  std::uniform_int_distribution<int> support_size(1, std::min(3, n_v));
  std::uniform_int_distribution<int> pick(0, n_v - 1);
  std::bernoulli_distribution unit_entry(0.5);

  for (int c = 0; c < r; ++c) {
    const int deg = support_size(rng);
    std::vector<int> rows;
    while (static_cast<int>(rows.size()) < deg) {
      const int i = pick(rng);
      if (std::find(rows.begin(), rows.end(), i) == rows.end())
        rows.push_back(i);
    }
    for (const int i : rows) {
      if (unit_entry(rng)) {
        s(i, c) = unit_entry(rng) ? 1.0 : -1.0;
      } else {
        double value = coeff(rng);
        if (std::abs(value) < 0.1) value = 0.5;
        s(i, c) = value;
      }
    }
    const int fanout =
        std::uniform_int_distribution<int>(1, std::min(3, n_phi))(rng);
    for (int k = 0; k < fanout; ++k) {
      phi(std::uniform_int_distribution<int>(0, n_phi - 1)(rng), c) +=
          coeff(rng);
    }
  }
  return Cpn1Model(std::move(part), std::move(phi), std::move(s));
}

/// Uniform random evaluation point over [-2, 2]^(N_v); integer-heavy with
/// probability 1/4 so zero factors actually occur.
[[nodiscard]] inline SignalVector make_random_point(const Cpn1Model& model,
                                                    std::mt19937& rng) {
  SignalVector v = model.make_vector();
  std::uniform_real_distribution<double> value(-2.0, 2.0);
  std::bernoulli_distribution integer_point(0.25);
  const bool snap = integer_point(rng);
  for (Eigen::Index i = 0; i < v.values.size(); ++i) {
    v.values[i] = snap ? std::round(value(rng)) : value(rng);
  }
  return v;
}

/// Central-difference Jacobian of the residual, matching the analytic
/// Jacobian's column order (all N_v signals).
[[nodiscard]] inline Eigen::MatrixXd fd_residual_jacobian(
    const Cpn1Model& model, const SignalVector& v, double step = 1e-6) {
  const int n_v = model.n_v();
  Eigen::MatrixXd j(model.n_phi(), n_v);
  SignalVector probe = v;
  for (int c = 0; c < n_v; ++c) {
    const double saved = probe.values[c];
    const double h = step * std::max(1.0, std::abs(saved));
    probe.values[c] = saved + h;
    const Eigen::VectorXd plus = eval_residual(model, probe);
    probe.values[c] = saved - h;
    const Eigen::VectorXd minus = eval_residual(model, probe);
    probe.values[c] = saved;
    j.col(c) = (plus - minus) / (2.0 * h);
  }
  return j;
}

}  // namespace mlstab::testing
