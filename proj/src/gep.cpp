#include "mlstab/gep.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <json.hpp>
#include <lapacke.h>

#include "mlstab/model_io.hpp"

namespace mlstab {

namespace {

[[nodiscard]] double eig_distance(std::complex<double> a,
                                  std::complex<double> b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace

GepSolution generalized_eig(const Eigen::MatrixXd& e, const Eigen::MatrixXd& a,
                            const GepConfig& config) {
  if (e.rows() != e.cols() || a.rows() != a.cols() || e.rows() != a.rows()) {
    throw std::invalid_argument("generalized_eig: E and A must be square and "
                                "of equal dimension");
  }
  const int n = static_cast<int>(e.rows());
  GepSolution sol;
  if (n == 0) return sol;

  // The QZ driver overwrites its inputs; pass working copies (column-major,
  // which is Eigen's default layout).
  Eigen::MatrixXd a_work = a;
  Eigen::MatrixXd e_work = e;
  Eigen::VectorXd alphar(n), alphai(n), beta(n);
  Eigen::MatrixXd vl(n, n), vr(n, n);

  // beta is the E-side coefficient of each pair and alpha the A-side one, so
  // each gets a cut relative to its own matrix norm; mixing the two inflates
  // the beta cut whenever A carries much larger entries than E.
  double a_norm = a.cwiseAbs().maxCoeff();
  double e_norm = e.cwiseAbs().maxCoeff();
  lapack_int info = 0;
  if (config.balance) {
    // Expert driver with full balancing: row/column scaling by exact powers
    // of two keeps badly scaled physical pencils (entries spanning many
    // orders of magnitude) from pushing fast finite modes into beta ~ 0.
    // Eigenvectors come back already transformed to original coordinates.
    lapack_int ilo = 0, ihi = 0;
    Eigen::VectorXd lscale(n), rscale(n), rconde(n), rcondv(n);
    double abnrm = 0.0, bbnrm = 0.0;
    info = LAPACKE_dggevx(LAPACK_COL_MAJOR, 'B', 'V', 'V', 'N', n,
                          a_work.data(), n, e_work.data(), n, alphar.data(),
                          alphai.data(), beta.data(), vl.data(), n, vr.data(),
                          n, &ilo, &ihi, lscale.data(), rscale.data(), &abnrm,
                          &bbnrm, rconde.data(), rcondv.data());
    a_norm = abnrm;
    e_norm = bbnrm;
  } else {
    info = LAPACKE_dggev(LAPACK_COL_MAJOR, 'V', 'V', n, a_work.data(), n,
                         e_work.data(), n, alphar.data(), alphai.data(),
                         beta.data(), vl.data(), n, vr.data(), n);
  }
  if (info != 0) {
    throw std::runtime_error("generalized_eig: QZ iteration failed (info = " +
                             std::to_string(info) + ")");
  }

  const double beta_cut = config.infinite_tol_scale * std::max(e_norm, 1.0);
  const double alpha_cut = config.infinite_tol_scale * std::max(a_norm, 1.0);

  sol.alphas.resize(n);
  sol.betas.resize(n);
  sol.right_vectors.resize(n, n);
  sol.left_vectors.resize(n, n);

  // Unpack the real-QZ eigenvector storage: a complex-conjugate pair occupies
  // two consecutive columns holding (real part, imaginary part).
  for (int j = 0; j < n; ++j) {
    sol.alphas[j] = {alphar[j], alphai[j]};
    sol.betas[j] = beta[j];
    if (alphai[j] > 0.0 && j + 1 < n) {
      sol.right_vectors.col(j) =
          vr.col(j).cast<std::complex<double>>() +
          std::complex<double>(0, 1) * vr.col(j + 1).cast<std::complex<double>>();
      sol.right_vectors.col(j + 1) = sol.right_vectors.col(j).conjugate();
      sol.left_vectors.col(j) =
          vl.col(j).cast<std::complex<double>>() +
          std::complex<double>(0, 1) * vl.col(j + 1).cast<std::complex<double>>();
      sol.left_vectors.col(j + 1) = sol.left_vectors.col(j).conjugate();
    } else if (alphai[j] >= 0.0) {
      sol.right_vectors.col(j) = vr.col(j).cast<std::complex<double>>();
      sol.left_vectors.col(j) = vl.col(j).cast<std::complex<double>>();
    }
  }

  for (int j = 0; j < n; ++j) {
    if (std::abs(beta[j]) <= beta_cut) {
      if (std::abs(sol.alphas[j]) <= alpha_cut) {
        throw std::runtime_error(
            "generalized_eig: singular pencil (alpha and beta both vanish); "
            "det(lambda*E - A) is identically zero");
      }
      ++sol.infinite_count;
      sol.infinite_indices.push_back(j);
    } else {
      sol.finite.push_back(sol.alphas[j] / beta[j]);
      sol.finite_indices.push_back(j);
    }
  }
  return sol;
}

GepSolution generalized_eig(const DescriptorSystem& sys,
                            const GepConfig& config) {
  return generalized_eig(sys.e, sys.a, config);
}

StabilityVerdict stability_verdict(const GepSolution& sol, double tol) {
  StabilityVerdict verdict;
  if (sol.finite.empty()) return verdict;

  double nonzero_margin = -std::numeric_limits<double>::infinity();
  for (const auto& lambda : sol.finite) {
    if (std::abs(lambda) <= tol) {
      ++verdict.zero_eigs;
      continue;
    }
    if (lambda.real() > tol) verdict.stable = false;
    if (std::abs(lambda.real()) <= tol) verdict.marginal = true;
    nonzero_margin = std::max(nonzero_margin, lambda.real());
  }
  if (std::isfinite(nonzero_margin)) verdict.margin = nonzero_margin;
  for (const auto& lambda : sol.finite) {
    if (std::abs(lambda) <= tol) continue;
    if (std::abs(lambda.real() - nonzero_margin) <= tol) {
      verdict.dominant.push_back(lambda);
    }
  }
  return verdict;
}

ProperForm to_proper(const DescriptorSystem& sys) {
  const int dim = sys.dim();
  const double tiny = 0.0;

  std::vector<int> dyn_cols, alg_cols, dyn_rows, alg_rows;
  for (int j = 0; j < dim; ++j) {
    if (sys.e.col(j).cwiseAbs().maxCoeff() > tiny) {
      dyn_cols.push_back(j);
    } else {
      alg_cols.push_back(j);
    }
  }
  for (int i = 0; i < dim; ++i) {
    if (sys.e.row(i).cwiseAbs().maxCoeff() > tiny) {
      dyn_rows.push_back(i);
    } else {
      alg_rows.push_back(i);
    }
  }
  if (dyn_rows.size() != dyn_cols.size()) {
    throw std::runtime_error(
        "to_proper: descriptor matrix is not block-eliminable (" +
        std::to_string(dyn_rows.size()) + " dynamic rows vs " +
        std::to_string(dyn_cols.size()) + " dynamic columns)");
  }

  const int k = static_cast<int>(dyn_cols.size());
  const int l = dim - k;
  const int m = static_cast<int>(sys.b.cols());

  auto gather = [](const Eigen::MatrixXd& src, const std::vector<int>& rows,
                   const std::vector<int>& cols) {
    Eigen::MatrixXd out(rows.size(), cols.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (std::size_t j = 0; j < cols.size(); ++j) {
        out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            src(rows[i], cols[j]);
      }
    }
    return out;
  };
  auto gather_rows = [&](const Eigen::MatrixXd& src,
                         const std::vector<int>& rows) {
    Eigen::MatrixXd out(rows.size(), src.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      out.row(static_cast<Eigen::Index>(i)) = src.row(rows[i]);
    }
    return out;
  };

  const Eigen::MatrixXd e11 = gather(sys.e, dyn_rows, dyn_cols);
  const Eigen::MatrixXd a11 = gather(sys.a, dyn_rows, dyn_cols);
  const Eigen::MatrixXd a12 = gather(sys.a, dyn_rows, alg_cols);
  const Eigen::MatrixXd a21 = gather(sys.a, alg_rows, dyn_cols);
  const Eigen::MatrixXd a22 = gather(sys.a, alg_rows, alg_cols);
  const Eigen::MatrixXd b1 = gather_rows(sys.b, dyn_rows);
  const Eigen::MatrixXd b2 = gather_rows(sys.b, alg_rows);

  Eigen::MatrixXd a_coupled = a11;
  Eigen::MatrixXd b_coupled = b1;
  if (l > 0) {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(a22);
    if (lu.rank() < l) {
      throw std::runtime_error(
          "to_proper: algebraic block of A is rank deficient (rank " +
          std::to_string(lu.rank()) + " of " + std::to_string(l) +
          "); algebraic variables cannot be eliminated at this point");
    }
    a_coupled -= a12 * lu.solve(a21);
    if (m > 0) b_coupled -= a12 * lu.solve(b2);
  }

  Eigen::FullPivLU<Eigen::MatrixXd> e_lu(e11);
  if (e_lu.rank() < k) {
    throw std::runtime_error(
        "to_proper: dynamic block of E is rank deficient (rank " +
        std::to_string(e_lu.rank()) + " of " + std::to_string(k) + ")");
  }

  ProperForm out;
  out.a = e_lu.solve(a_coupled);
  out.b = m > 0 ? Eigen::MatrixXd(e_lu.solve(b_coupled))
                : Eigen::MatrixXd(k, 0);
  for (const int j : dyn_cols) {
    out.kept_names.push_back(
        j < static_cast<int>(sys.state_names.size()) ? sys.state_names[j]
                                                     : "x" + std::to_string(j));
  }
  for (const int j : alg_cols) {
    out.eliminated_names.push_back(
        j < static_cast<int>(sys.state_names.size()) ? sys.state_names[j]
                                                     : "x" + std::to_string(j));
  }
  return out;
}

EigMatchReport eig_compare(const std::vector<std::complex<double>>& a,
                           const std::vector<std::complex<double>>& b,
                           double tol) {
  EigMatchReport report;
  std::vector<bool> used_a(a.size(), false), used_b(b.size(), false);

  // Greedy globally-nearest pairing; adequate for well-separated spectra.
  const std::size_t rounds = std::min(a.size(), b.size());
  for (std::size_t round = 0; round < rounds; ++round) {
    double best = std::numeric_limits<double>::infinity();
    int best_i = -1, best_j = -1;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (used_a[i]) continue;
      for (std::size_t j = 0; j < b.size(); ++j) {
        if (used_b[j]) continue;
        const double d = eig_distance(a[i], b[j]);
        if (d < best) {
          best = d;
          best_i = static_cast<int>(i);
          best_j = static_cast<int>(j);
        }
      }
    }
    used_a[best_i] = true;
    used_b[best_j] = true;
    report.pairs.push_back({best_i, best_j, best});
    report.max_distance = std::max(report.max_distance, best);
    if (best > tol) report.all_within_tol = false;
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!used_a[i]) report.unmatched_a.push_back(static_cast<int>(i));
  }
  for (std::size_t j = 0; j < b.size(); ++j) {
    if (!used_b[j]) report.unmatched_b.push_back(static_cast<int>(j));
  }
  return report;
}

std::string gep_to_json(const GepSolution& sol,
                        const StabilityVerdict& verdict) {
  nlohmann::json j;
  nlohmann::json finite = nlohmann::json::array();
  for (const auto& lambda : sol.finite) {
    finite.push_back({{"re", lambda.real()}, {"im", lambda.imag()}});
  }
  j["finite"] = std::move(finite);
  j["infinite_count"] = sol.infinite_count;
  nlohmann::json dominant = nlohmann::json::array();
  for (const auto& lambda : verdict.dominant) {
    dominant.push_back({{"re", lambda.real()}, {"im", lambda.imag()}});
  }
  j["verdict"] = {{"stable", verdict.stable},
                  {"margin", verdict.margin},
                  {"zero_count", verdict.zero_eigs},
                  {"marginal", verdict.marginal},
                  {"dominant", std::move(dominant)}};
  return j.dump(2) + "\n";
}

void save_gep(const GepSolution& sol, const StabilityVerdict& verdict,
              const std::string& path) {
  write_text_file(path, gep_to_json(sol, verdict));
}

}  // namespace mlstab
