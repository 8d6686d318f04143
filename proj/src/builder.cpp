// ============================================================================
// builder.cpp — equation-level model assembly with shared factor columns.
// ============================================================================
#include "mlstab/builder.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace mlstab {

namespace {

[[nodiscard]] std::vector<std::string> sorted_copy(std::vector<std::string> v) {
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

// ============================================================================
// Signal registration
// ============================================================================

void EquationBuilder::require_new_name(const std::string& name) const {
  if (name.empty())
    throw std::invalid_argument("builder: signal name must not be empty");
  auto contains = [&name](const std::vector<std::string>& v) {
    return std::find(v.begin(), v.end(), name) != v.end();
  };
  if (contains(states_) || contains(inputs_) || contains(outputs_) ||
      contains(algebraics_))
    throw std::invalid_argument("builder: duplicate signal name '" + name + "'");
}

void EquationBuilder::add_state(const std::string& name) {
  require_new_name(name);
  states_.push_back(name);
}

void EquationBuilder::add_input(const std::string& name) {
  require_new_name(name);
  inputs_.push_back(name);
}

void EquationBuilder::add_output(const std::string& name) {
  require_new_name(name);
  outputs_.push_back(name);
}

void EquationBuilder::add_algebraic(const std::string& name) {
  require_new_name(name);
  algebraics_.push_back(name);
}

void EquationBuilder::add_lift(const std::string& cos_state,
                               const std::string& sin_state) {
  auto is_state = [this](const std::string& n) {
    return std::find(states_.begin(), states_.end(), n) != states_.end();
  };
  if (!is_state(cos_state) || !is_state(sin_state))
    throw std::invalid_argument("builder: lift pair (" + cos_state + ", " +
                                sin_state + ") must name registered states");
  lifts_.emplace_back(cos_state, sin_state);
}

void EquationBuilder::add_equation(const std::string& name,
                                   std::vector<Term> terms, double scale) {
  if (terms.empty())
    throw std::invalid_argument("builder: equation '" + name + "' has no terms");
  if (scale == 0.0 || !std::isfinite(scale))
    throw std::invalid_argument("builder: equation '" + name +
                                "' has an invalid scale");
  equations_.push_back(Equation{name, scale, std::move(terms)});
}

// ============================================================================
// Layout computation
// ============================================================================

struct EquationBuilder::Layout {
  SignalPartition partition;
  Eigen::Index n_columns = 0;
  // Per column: participating signal indices and the (row, coefficient)
  // contributions accumulated into Phi.
  std::vector<std::vector<Eigen::Index>> column_signals;
  std::vector<std::vector<std::pair<Eigen::Index, double>>> column_phi;
};

SignalPartition EquationBuilder::partition() const {
  SignalPartition part;
  part.n = static_cast<Eigen::Index>(states_.size());
  part.m = static_cast<Eigen::Index>(inputs_.size());
  part.p = static_cast<Eigen::Index>(outputs_.size());
  part.q = static_cast<Eigen::Index>(algebraics_.size());
  part.names.reserve(static_cast<std::size_t>(part.n_v()));
  for (const std::string& s : states_) part.names.push_back(s + "_dot");
  for (const std::string& s : states_) part.names.push_back(s);
  for (const std::string& s : inputs_) part.names.push_back(s);
  for (const std::string& s : outputs_) part.names.push_back(s);
  for (const std::string& s : algebraics_) part.names.push_back(s);
  return part;
}

EquationBuilder::Layout EquationBuilder::compute_layout() const {
  Layout layout;
  layout.partition = partition();

  std::unordered_map<std::string, Eigen::Index> index;
  for (std::size_t i = 0; i < layout.partition.names.size(); ++i)
    index.emplace(layout.partition.names[i], static_cast<Eigen::Index>(i));

  struct SharedColumn {
    Eigen::Index column;
    std::vector<std::string> signature;
  };
  std::unordered_map<std::string, SharedColumn> shared;

  for (std::size_t e = 0; e < equations_.size(); ++e) {
    const Equation& eq = equations_[e];
    const auto row = static_cast<Eigen::Index>(e);
    for (const Term& term : eq.terms) {
      std::vector<Eigen::Index> signal_ids;
      signal_ids.reserve(term.signals.size());
      for (const std::string& s : term.signals) {
        auto it = index.find(s);
        if (it == index.end())
          throw std::invalid_argument("builder: equation '" + eq.name +
                                      "' references unknown signal '" + s + "'");
        signal_ids.push_back(it->second);
      }
      std::vector<Eigen::Index> unique_ids = signal_ids;
      std::sort(unique_ids.begin(), unique_ids.end());
      if (std::adjacent_find(unique_ids.begin(), unique_ids.end()) !=
          unique_ids.end())
        throw std::invalid_argument(
            "builder: equation '" + eq.name +
            "' repeats a signal within one term; lift powers explicitly to "
            "keep the model multilinear");

      const double coeff = term.coeff / eq.scale;
      Eigen::Index column;
      if (term.share.empty()) {
        column = layout.n_columns++;
        layout.column_signals.push_back(signal_ids);
        layout.column_phi.emplace_back();
      } else {
        auto it = shared.find(term.share);
        if (it == shared.end()) {
          column = layout.n_columns++;
          layout.column_signals.push_back(signal_ids);
          layout.column_phi.emplace_back();
          shared.emplace(term.share,
                         SharedColumn{column, sorted_copy(term.signals)});
        } else {
          if (it->second.signature != sorted_copy(term.signals))
            throw std::invalid_argument(
                "builder: sharing tag '" + term.share +
                "' is used with different signal sets (equation '" + eq.name +
                "')");
          column = it->second.column;
        }
      }
      layout.column_phi[static_cast<std::size_t>(column)].emplace_back(row,
                                                                       coeff);
    }
  }
  return layout;
}

Eigen::Index EquationBuilder::equation_count() const {
  return static_cast<Eigen::Index>(equations_.size());
}

Eigen::Index EquationBuilder::column_count() const {
  return compute_layout().n_columns;
}

// ============================================================================
// Assembly
// ============================================================================

Cpn1Model EquationBuilder::build() const {
  if (equations_.empty())
    throw std::invalid_argument("builder: no equations added");

  const Layout layout = compute_layout();
  const auto n_phi = static_cast<Eigen::Index>(equations_.size());
  const Eigen::Index n_v = layout.partition.n_v();
  const Eigen::Index r = layout.n_columns;

  Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(n_phi, r);
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(n_v, r);
  for (Eigen::Index col = 0; col < r; ++col) {
    for (Eigen::Index sig : layout.column_signals[static_cast<std::size_t>(col)])
      s(sig, col) = 1.0;
    for (const auto& [row, coeff] :
         layout.column_phi[static_cast<std::size_t>(col)])
      phi(row, col) += coeff;
  }

  std::vector<LiftPair> lifts;
  lifts.reserve(lifts_.size());
  for (const auto& [cos_state, sin_state] : lifts_) {
    const auto find_state = [this](const std::string& n) {
      return static_cast<Eigen::Index>(
          std::find(states_.begin(), states_.end(), n) - states_.begin());
    };
    LiftPair lift;
    lift.cos_index = layout.partition.z_begin() + find_state(cos_state);
    lift.sin_index = layout.partition.z_begin() + find_state(sin_state);
    lifts.push_back(lift);
  }

  std::vector<std::string> equation_names;
  equation_names.reserve(equations_.size());
  for (const Equation& eq : equations_) equation_names.push_back(eq.name);

  return Cpn1Model(layout.partition, std::move(phi), std::move(s),
                   std::move(lifts), std::move(equation_names));
}

}  // namespace mlstab
