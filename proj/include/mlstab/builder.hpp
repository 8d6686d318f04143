// ============================================================================
// builder.hpp — incremental construction of CPN1 models from named equations.
//
// Each equation is a sum of multilinear terms; every term occupies one factor
// column unless it carries a sharing tag, in which case all occurrences of
// that tag (across equations) reuse a single column. An optional per-equation
// scale divides the row's coefficients, which normalizes residual magnitudes
// without changing the solution set or the pencil spectrum.
// ============================================================================
#pragma once

#include <string>
#include <vector>

#include "mlstab/model.hpp"

namespace mlstab {

class EquationBuilder {
 public:
  /// One multilinear monomial: coeff * prod(signals). An empty signal list is
  /// a constant term. Terms with the same non-empty `share` tag must have the
  /// same signal set and collapse onto one shared factor column.
  struct Term {
    Term() = default;
    Term(double coeff_in, std::vector<std::string> signals_in,
         std::string share_in = {})
        : coeff(coeff_in),
          signals(std::move(signals_in)),
          share(std::move(share_in)) {}

    double coeff = 0.0;
    std::vector<std::string> signals;
    std::string share;
  };

  /// Registers a state `x` together with its derivative signal `x_dot`.
  void add_state(const std::string& name);
  void add_input(const std::string& name);
  void add_output(const std::string& name);
  void add_algebraic(const std::string& name);

  /// Registers a unit-circle pair of previously added states.
  void add_lift(const std::string& cos_state, const std::string& sin_state);

  /// Appends the equation 0 = (sum of terms) / scale.
  void add_equation(const std::string& name, std::vector<Term> terms,
                    double scale = 1.0);

  [[nodiscard]] Eigen::Index equation_count() const;
  /// Number of factor columns the built model will have.
  [[nodiscard]] Eigen::Index column_count() const;
  [[nodiscard]] SignalPartition partition() const;

  /// Assembles and validates the model.
  [[nodiscard]] Cpn1Model build() const;

 private:
  struct Equation {
    std::string name;
    double scale = 1.0;
    std::vector<Term> terms;
  };

  struct Layout;
  [[nodiscard]] Layout compute_layout() const;
  void require_new_name(const std::string& name) const;

  std::vector<std::string> states_;
  std::vector<std::string> inputs_;
  std::vector<std::string> outputs_;
  std::vector<std::string> algebraics_;
  std::vector<std::pair<std::string, std::string>> lifts_;
  std::vector<Equation> equations_;
};

}  // namespace mlstab
