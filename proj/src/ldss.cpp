#include "mlstab/ldss.hpp"

#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "mlstab/eval.hpp"
#include "mlstab/model_io.hpp"

namespace mlstab {

namespace {

using nlohmann::json;

[[nodiscard]] json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

[[nodiscard]] Eigen::MatrixXd matrix_from_json(const json& rows) {
  const auto n_rows = rows.size();
  const auto n_cols = n_rows == 0 ? 0 : rows[0].size();
  Eigen::MatrixXd m(n_rows, n_cols);
  for (std::size_t i = 0; i < n_rows; ++i) {
    if (rows[i].size() != n_cols) {
      throw std::runtime_error("descriptor file: ragged matrix rows");
    }
    for (std::size_t j = 0; j < n_cols; ++j) {
      const double x = rows[i][j].get<double>();
      if (!std::isfinite(x)) {
        throw std::runtime_error("descriptor file: non-finite entry");
      }
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = x;
    }
  }
  return m;
}

}  // namespace

DescriptorSystem extract_ldss(const Cpn1Model& model,
                              const OperatingPoint& point,
                              double equilibrium_tol) {
  check_compatible(model, point.v_bar);
  const auto& part = model.partition();

  const Eigen::VectorXd h = eval_residual(model, point.v_bar);
  const double h_norm = h.lpNorm<Eigen::Infinity>();
  if (h_norm > equilibrium_tol) {
    throw std::runtime_error(
        "extract_ldss: point is not an equilibrium (||h||_inf = " +
        std::to_string(h_norm) + " > " + std::to_string(equilibrium_tol) +
        "); run the equilibrium finder first");
  }
  const double zdot_norm =
      part.n == 0 ? 0.0
                  : point.v_bar.values.head(part.n).lpNorm<Eigen::Infinity>();
  if (zdot_norm > equilibrium_tol) {
    throw std::runtime_error(
        "extract_ldss: derivative slots are nonzero (||zdot||_inf = " +
        std::to_string(zdot_norm) + "); not an equilibrium");
  }

  const JacobianResult jac = jacobian(model, point);
  const int dim = part.n + part.p + part.q;
  if (model.n_phi() != dim) {
    throw std::runtime_error(
        "extract_ldss: model is not square (" + std::to_string(model.n_phi()) +
        " equations vs " + std::to_string(dim) + " descriptor coordinates)");
  }

  DescriptorSystem sys;
  sys.point = point;
  sys.e = Eigen::MatrixXd::Zero(dim, dim);
  sys.e.leftCols(part.n) = -jac.j.leftCols(part.n);
  sys.a = Eigen::MatrixXd::Zero(dim, dim);
  sys.a.leftCols(part.n) = jac.j.middleCols(part.z_begin(), part.n);
  sys.a.middleCols(part.n, part.p + part.q) =
      jac.j.middleCols(part.y_begin(), part.p + part.q);
  sys.b = jac.j.middleCols(part.u_begin(), part.m);

  sys.state_names.reserve(dim);
  for (int i = 0; i < part.n; ++i) {
    sys.state_names.push_back(part.names[part.z_begin() + i]);
  }
  for (int i = 0; i < part.p + part.q; ++i) {
    sys.state_names.push_back(part.names[part.y_begin() + i]);
  }
  sys.input_names.assign(part.names.begin() + part.u_begin(),
                         part.names.begin() + part.u_begin() + part.m);
  return sys;
}

std::string ldss_to_json(const DescriptorSystem& sys) {
  json j;
  j["e"] = matrix_to_json(sys.e);
  j["a"] = matrix_to_json(sys.a);
  j["b"] = matrix_to_json(sys.b);
  json point;
  if (sys.point.v_bar.partition) {
    point["names"] = sys.point.v_bar.partition->names;
    json values = json::array();
    for (Eigen::Index i = 0; i < sys.point.v_bar.values.size(); ++i) {
      values.push_back(sys.point.v_bar.values[i]);
    }
    point["values"] = std::move(values);
  }
  j["point"] = std::move(point);
  j["names"] = {{"state", sys.state_names}, {"input", sys.input_names}};
  return j.dump(2) + "\n";
}

void save_ldss(const DescriptorSystem& sys, const std::string& path) {
  write_text_file(path, ldss_to_json(sys));
}

DescriptorSystem ldss_from_json(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) {
    throw std::runtime_error("descriptor file: malformed JSON");
  }
  DescriptorSystem sys;
  sys.e = matrix_from_json(j.at("e"));
  sys.a = matrix_from_json(j.at("a"));
  sys.b = matrix_from_json(j.at("b"));
  if (sys.e.rows() != sys.e.cols() || sys.a.rows() != sys.a.cols() ||
      sys.e.rows() != sys.a.rows() || sys.b.rows() != sys.e.rows()) {
    throw std::runtime_error("descriptor file: inconsistent matrix shapes");
  }
  if (j.contains("names")) {
    for (const auto& name : j["names"].value("state", json::array())) {
      sys.state_names.push_back(name.get<std::string>());
    }
    for (const auto& name : j["names"].value("input", json::array())) {
      sys.input_names.push_back(name.get<std::string>());
    }
  }
  if (j.contains("point") && j["point"].contains("names")) {
    auto partition = std::make_shared<SignalPartition>();
    // The stored point is carried as an opaque named vector: reconstruct a
    // flat partition (all algebraic) good enough for reporting.
    const auto& names_json = j["point"]["names"];
    const auto& values_json = j["point"]["values"];
    partition->q = static_cast<int>(names_json.size());
    for (const auto& name : names_json) {
      partition->names.push_back(name.get<std::string>());
    }
    Eigen::VectorXd values(values_json.size());
    for (std::size_t i = 0; i < values_json.size(); ++i) {
      values[static_cast<Eigen::Index>(i)] = values_json[i].get<double>();
    }
    sys.point.v_bar =
        SignalVector{std::move(values),
                     std::shared_ptr<const SignalPartition>(partition)};
  }
  return sys;
}

DescriptorSystem load_ldss(const std::string& path) {
  return ldss_from_json(read_text_file(path));
}

// ============================================================================
// Linear simulation
// ============================================================================

namespace {

struct AlgebraicSplit {
  std::vector<int> alg_rows;
  std::vector<int> alg_cols;
  std::vector<int> diff_cols;
};

AlgebraicSplit split_algebraic(const DescriptorSystem& sys) {
  AlgebraicSplit split;
  const int dim = sys.dim();
  for (int i = 0; i < dim; ++i) {
    if (sys.e.row(i).cwiseAbs().maxCoeff() == 0.0) split.alg_rows.push_back(i);
  }
  for (int j = 0; j < dim; ++j) {
    if (sys.e.col(j).cwiseAbs().maxCoeff() == 0.0) {
      split.alg_cols.push_back(j);
    } else {
      split.diff_cols.push_back(j);
    }
  }
  if (split.alg_rows.size() != split.alg_cols.size()) {
    throw std::runtime_error(
        "simulate_ldss: algebraic rows (" + std::to_string(split.alg_rows.size()) +
        ") and algebraic columns (" + std::to_string(split.alg_cols.size()) +
        ") of E do not pair up");
  }
  return split;
}

Eigen::VectorXd effective_du(const DescriptorSystem& sys,
                             const Eigen::VectorXd& du) {
  if (du.size() == 0) return Eigen::VectorXd::Zero(sys.b.cols());
  if (du.size() != sys.b.cols()) {
    throw std::invalid_argument("simulate_ldss: input deviation has size " +
                                std::to_string(du.size()) + ", expected " +
                                std::to_string(sys.b.cols()));
  }
  return du;
}

Eigen::VectorXd effective_forcing(const DescriptorSystem& sys,
                                  const Eigen::VectorXd& forcing) {
  if (forcing.size() == 0) return Eigen::VectorXd::Zero(sys.dim());
  if (forcing.size() != sys.dim()) {
    throw std::invalid_argument("simulate_ldss: forcing has size " +
                                std::to_string(forcing.size()) + ", expected " +
                                std::to_string(sys.dim()));
  }
  return forcing;
}

}  // namespace

Eigen::VectorXd ldss_consistent(const DescriptorSystem& sys,
                                const Eigen::VectorXd& x,
                                const Eigen::VectorXd& du,
                                const Eigen::VectorXd& forcing) {
  if (x.size() != sys.dim()) {
    throw std::invalid_argument("ldss_consistent: state size mismatch");
  }
  const AlgebraicSplit split = split_algebraic(sys);
  const auto n_alg = static_cast<int>(split.alg_rows.size());
  if (n_alg == 0) return x;
  const Eigen::VectorXd du_full = effective_du(sys, du);
  const Eigen::VectorXd f_full = effective_forcing(sys, forcing);

  Eigen::MatrixXd a22(n_alg, n_alg);
  Eigen::VectorXd rhs(n_alg);
  for (int i = 0; i < n_alg; ++i) {
    const int row = split.alg_rows[static_cast<std::size_t>(i)];
    double acc = f_full[row] + sys.b.row(row).dot(du_full);
    for (const int col : split.diff_cols) acc += sys.a(row, col) * x[col];
    rhs[i] = -acc;
    for (int jj = 0; jj < n_alg; ++jj) {
      a22(i, jj) = sys.a(row, split.alg_cols[static_cast<std::size_t>(jj)]);
    }
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(a22);
  if (!lu.isInvertible()) {
    throw std::runtime_error(
        "ldss_consistent: algebraic block is singular (rank " +
        std::to_string(lu.rank()) + " of " + std::to_string(n_alg) + ")");
  }
  const Eigen::VectorXd y = lu.solve(rhs);
  Eigen::VectorXd out = x;
  for (int jj = 0; jj < n_alg; ++jj) {
    out[split.alg_cols[static_cast<std::size_t>(jj)]] = y[jj];
  }
  return out;
}

Trajectory simulate_ldss(const DescriptorSystem& sys,
                         const Eigen::VectorXd& x0,
                         const std::vector<LdssSegment>& segments,
                         double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("simulate_ldss: dt must be positive");
  if (segments.empty()) throw std::invalid_argument("simulate_ldss: no segments");
  for (std::size_t k = 0; k < segments.size(); ++k) {
    if (!(segments[k].t_end > segments[k].t_begin)) {
      throw std::invalid_argument("simulate_ldss: empty segment " + std::to_string(k));
    }
    if (k > 0 && std::abs(segments[k].t_begin - segments[k - 1].t_end) > 1e-12) {
      throw std::invalid_argument("simulate_ldss: segments are not contiguous");
    }
  }
  const int dim = sys.dim();
  if (x0.size() != dim) {
    throw std::invalid_argument("simulate_ldss: initial state size mismatch");
  }

  // Absolute base values over (z, y, alpha) from the stored operating point.
  Eigen::VectorXd base = Eigen::VectorXd::Zero(dim);
  if (sys.point.v_bar.partition &&
      sys.point.v_bar.values.size() > 0 &&
      static_cast<int>(sys.state_names.size()) == dim) {
    const SignalPartition& part = *sys.point.v_bar.partition;
    for (int j = 0; j < dim; ++j) {
      if (part.has(sys.state_names[static_cast<std::size_t>(j)])) {
        base[j] = sys.point.v_bar.values[part.index_of(
            sys.state_names[static_cast<std::size_t>(j)])];
      }
    }
  }

  Trajectory traj;
  traj.signal_names = sys.state_names;
  std::vector<Eigen::VectorXd> rows;
  const double c = 2.0 / dt;

  Eigen::VectorXd x = x0;
  for (const LdssSegment& seg : segments) {
    const Eigen::VectorXd du = effective_du(sys, seg.du);
    const Eigen::VectorXd f = effective_forcing(sys, seg.forcing);
    x = ldss_consistent(sys, x, du, f);
    traj.times.push_back(seg.t_begin);
    rows.push_back(base + x);

    Eigen::FullPivLU<Eigen::MatrixXd> lu(c * sys.e - sys.a);
    if (!lu.isInvertible()) {
      throw std::runtime_error("simulate_ldss: (2/dt) E - A is singular");
    }
    const Eigen::VectorXd drive = 2.0 * (sys.b * du + f);
    const Eigen::MatrixXd right = c * sys.e + sys.a;

    double t = seg.t_begin;
    const auto n_steps = static_cast<long>(
        std::ceil((seg.t_end - seg.t_begin) / dt - 1e-9));
    for (long s = 0; s < n_steps; ++s) {
      const double h = std::min(dt, seg.t_end - t);
      if (std::abs(h - dt) > 1e-12 * dt) {
        // Last sliver uses its own factorization.
        const double cl = 2.0 / h;
        Eigen::FullPivLU<Eigen::MatrixXd> lu_l(cl * sys.e - sys.a);
        x = lu_l.solve((cl * sys.e + sys.a) * x + drive);
      } else {
        x = lu.solve(right * x + drive);
      }
      t += h;
      traj.times.push_back(t);
      rows.push_back(base + x);
      traj.stats.steps_accepted += 1;
    }
  }

  traj.samples.resize(static_cast<Eigen::Index>(rows.size()), dim);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    traj.samples.row(static_cast<Eigen::Index>(k)) = rows[k].transpose();
  }
  traj.drift.assign(rows.size(), 0.0);
  traj.completed = true;
  return traj;
}

}  // namespace mlstab
