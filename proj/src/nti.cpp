// ============================================================================
// nti.cpp — nonlinear reference models (independent of the factorized
// representation) used to validate simulation and spectra.
// ============================================================================
#include "mlstab/nti.hpp"

#include <cmath>
#include <stdexcept>

namespace mlstab {

namespace {

constexpr int kNewtonMaxIters = 25;
constexpr double kNewtonTol = 1e-12;

}  // namespace

// ============================================================================
// Generic helpers
// ============================================================================

Eigen::MatrixXd fd_jacobian(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& rhs,
    const Eigen::VectorXd& x, double step_scale) {
  const int n = static_cast<int>(x.size());
  const Eigen::VectorXd f0 = rhs(x);
  const int m = static_cast<int>(f0.size());
  Eigen::MatrixXd jac(m, n);
  Eigen::VectorXd xp = x;
  for (int j = 0; j < n; ++j) {
    const double h = step_scale * (1.0 + std::abs(x[j]));
    xp[j] = x[j] + h;
    const Eigen::VectorXd fp = rhs(xp);
    xp[j] = x[j] - h;
    const Eigen::VectorXd fm = rhs(xp);
    xp[j] = x[j];
    jac.col(j) = (fp - fm) / (2.0 * h);
  }
  return jac;
}

OdeResult integrate_trapezoidal(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& rhs,
    const Eigen::VectorXd& x0, double t_begin, double t_end, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("integrate_trapezoidal: dt must be positive");
  if (!(t_end > t_begin)) throw std::invalid_argument("integrate_trapezoidal: empty time span");

  const int n = static_cast<int>(x0.size());
  const auto n_steps = static_cast<std::size_t>(std::ceil((t_end - t_begin) / dt - 1e-9));

  OdeResult result;
  result.times.reserve(n_steps + 1);
  result.states.resize(static_cast<Eigen::Index>(n_steps) + 1, n);
  result.times.push_back(t_begin);
  result.states.row(0) = x0.transpose();

  Eigen::VectorXd x = x0;
  Eigen::VectorXd f_old = rhs(x);
  double t = t_begin;
  for (std::size_t k = 0; k < n_steps; ++k) {
    const double h = std::min(dt, t_end - t);
    // Predictor, then Newton on r(x+) = x+ - x - h/2 (f(x+) + f(x)).
    Eigen::VectorXd x_new = x + h * f_old;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(
        Eigen::MatrixXd(Eigen::MatrixXd::Identity(n, n) -
                        0.5 * h * fd_jacobian(rhs, x_new)));
    bool converged = false;
    for (int it = 0; it < kNewtonMaxIters; ++it) {
      const Eigen::VectorXd r = x_new - x - 0.5 * h * (rhs(x_new) + f_old);
      const Eigen::VectorXd delta = lu.solve(r);
      x_new -= delta;
      double scaled = 0.0;
      for (int i = 0; i < n; ++i) {
        scaled = std::max(scaled, std::abs(delta[i]) / (1.0 + std::abs(x_new[i])));
      }
      if (scaled <= kNewtonTol) {
        converged = true;
        break;
      }
      if (it == 4 || it == 9 || it == 14) {
        lu.compute(Eigen::MatrixXd::Identity(n, n) -
                   0.5 * h * fd_jacobian(rhs, x_new));
      }
    }
    if (!converged) {
      throw std::runtime_error("integrate_trapezoidal: Newton failed to converge at t=" +
                               std::to_string(t + h));
    }
    t += h;
    x = x_new;
    f_old = rhs(x);
    result.times.push_back(t);
    result.states.row(static_cast<Eigen::Index>(k) + 1) = x.transpose();
  }
  return result;
}

// ============================================================================
// 2-state PLL reference
// ============================================================================

Eigen::Vector2d pll_nti_rhs(double k_p, double k_i, double u1, double u2,
                            const Eigen::Vector2d& x) {
  const double eps = u1 * std::sin(x[0]) + u2 * std::cos(x[0]);
  return {x[1] - k_p * eps, -k_i * eps};
}

Eigen::Matrix2d pll_nti_jacobian(double k_p, double k_i, double u1, double u2,
                                 const Eigen::Vector2d& x) {
  const double deps = u1 * std::cos(x[0]) - u2 * std::sin(x[0]);
  Eigen::Matrix2d jac;
  jac << -k_p * deps, 1.0, -k_i * deps, 0.0;
  return jac;
}

// ============================================================================
// 19-state three-bus reference
// ============================================================================

std::vector<std::string> NtiModel::state_names() {
  return {"omega_v", "delta_v", "x_qf",  "x_vad",  "x_vaq", "x_id",  "x_iq",
          "delta_p", "z3",      "x_ip",  "x_iqpq", "x_cd",  "x_cq",
          "i_gD",    "i_gQ",    "i_cDm", "i_cQm",  "i_cDl", "i_cQl"};
}

std::vector<std::string> NtiModel::output_names() {
  return {"v_D",   "v_Q",   "vd_gfm", "vq_gfm", "p_gfm", "q_gfm", "w_gfm",
          "vd_gfl", "vq_gfl", "p_gfl", "q_gfl", "w_pll"};
}

Eigen::VectorXd NtiModel::outputs(const Eigen::VectorXd& x) const {
  const BlockParams& pp = params;
  const double vD = pp.r_load * (x[13] + x[15] + x[17]);
  const double vQ = pp.r_load * (x[14] + x[16] + x[18]);

  const double cm = std::cos(x[1]);
  const double sm = std::sin(x[1]);
  const double vdm = cm * vD + sm * vQ;
  const double vqm = -sm * vD + cm * vQ;
  const double idm = cm * x[15] + sm * x[16];
  const double iqm = -sm * x[15] + cm * x[16];
  const double p_m = 1.5 * (vdm * idm + vqm * iqm);
  const double q_m = 1.5 * (vqm * idm - vdm * iqm);
  const double w_m = u[3] - pp.k_q * (x[2] - u[1] * pp.s_b);

  const double cp = std::cos(x[7]);
  const double sp = std::sin(x[7]);
  const double vdl = cp * vD - sp * vQ;
  const double vql = sp * vD + cp * vQ;
  const double idl = cp * x[17] - sp * x[18];
  const double iql = sp * x[17] + cp * x[18];
  const double p_l = 1.5 * (vdl * idl + vql * iql);
  const double q_l = 1.5 * (vql * idl - vdl * iql);
  const double w_pll = 1.0 + (x[8] - pp.k_p_pll * vql) / pp.omega_b;

  Eigen::VectorXd out(12);
  out << vD, vQ, vdm, vqm, p_m, q_m, w_m, vdl, vql, p_l, q_l, w_pll;
  return out;
}

Eigen::VectorXd NtiModel::rhs(const Eigen::VectorXd& x) const {
  if (x.size() != kStates) throw std::invalid_argument("NtiModel::rhs: state size mismatch");
  if (u.size() != 6) throw std::invalid_argument("NtiModel::rhs: expected 6 inputs");
  const BlockParams& pp = params;

  const double omega_v = x[0];
  const double x_qf = x[2];
  const double x_vad = x[3];
  const double x_vaq = x[4];
  const double x_id = x[5];
  const double x_iq = x[6];
  const double z3 = x[8];
  const double x_ip = x[9];
  const double x_iqpq = x[10];
  const double x_cd = x[11];
  const double x_cq = x[12];
  const double i_gD = x[13];
  const double i_gQ = x[14];
  const double i_cDm = x[15];
  const double i_cQm = x[16];
  const double i_cDl = x[17];
  const double i_cQl = x[18];

  const Eigen::VectorXd out = outputs(x);
  const double vD = out[0];
  const double vQ = out[1];
  const double vdm = out[2];
  const double vqm = out[3];
  const double p_m = out[4];
  const double q_m = out[5];
  const double w_m = out[6];
  const double vdl = out[7];
  const double vql = out[8];
  const double p_l = out[9];
  const double q_l = out[10];
  const double w_pll = out[11];

  const double cm = std::cos(x[1]);
  const double sm = std::sin(x[1]);
  const double cp = std::cos(x[7]);
  const double sp = std::sin(x[7]);

  const double idm = cm * i_cDm + sm * i_cQm;
  const double iqm = -sm * i_cDm + cm * i_cQm;
  const double idl = cp * i_cDl - sp * i_cQl;
  const double iql = sp * i_cDl + cp * i_cQl;

  Eigen::VectorXd dx(kStates);

  // --- Grid-forming converter -----------------------------------------------
  dx[0] = ((u[0] - p_m / pp.s_b) + pp.k_d * (omega_v - u[2])) / (2.0 * pp.h);
  dx[1] = pp.omega_b * (omega_v - 1.0);
  dx[2] = -pp.omega_f * x_qf + pp.omega_f * q_m;
  dx[3] = -(pp.r_v / pp.l_v) * x_vad - pp.omega_b * x_vaq + (w_m - vdm);
  dx[4] = -(pp.r_v / pp.l_v) * x_vaq + pp.omega_b * x_vad - vqm;
  const double isd_m = x_vad / pp.l_v;
  const double isq_m = x_vaq / pp.l_v;
  dx[5] = pp.k_i_cc * (isd_m - idm);
  dx[6] = pp.k_i_cc * (isq_m - iqm);
  // The integrator state already carries the k_i scaling (it is in volts), so
  // the output adds it directly.
  const double vcd_m = pp.k_p_cc * (isd_m - idm) + x_id -
                       pp.l_f * pp.omega_b * omega_v * iqm + vdm;
  const double vcq_m = pp.k_p_cc * (isq_m - iqm) + x_iq +
                       pp.l_f * pp.omega_b * omega_v * idm + vqm;
  const double vtD_m = cm * vcd_m - sm * vcq_m;
  const double vtQ_m = sm * vcd_m + cm * vcq_m;

  // --- Grid-following converter ---------------------------------------------
  dx[7] = z3 - pp.k_p_pll * vql;
  dx[8] = -pp.k_i_pll * vql;
  dx[9] = pp.k_i_pq * (u[4] * pp.s_b - p_l);
  dx[10] = pp.k_i_pq * (q_l - u[5] * pp.s_b);
  const double isd_l = pp.k_p_pq * (u[4] * pp.s_b - p_l) + x_ip;
  const double isq_l = pp.k_p_pq * (q_l - u[5] * pp.s_b) + x_iqpq;
  dx[11] = pp.k_i_cc * (isd_l - idl);
  dx[12] = pp.k_i_cc * (isq_l - iql);
  const double vcd_l = pp.k_p_cc * (isd_l - idl) + x_cd -
                       pp.l_f * pp.omega_b * w_pll * iql + vdl;
  const double vcq_l = pp.k_p_cc * (isq_l - iql) + x_cq +
                       pp.l_f * pp.omega_b * w_pll * idl + vql;
  const double vtD_l = cp * vcd_l + sp * vcq_l;
  const double vtQ_l = -sp * vcd_l + cp * vcq_l;

  // --- Network --------------------------------------------------------------
  const double v_src = pp.v_peak * pp.source_scale;
  dx[13] = -(pp.r_g / pp.l_g) * i_gD + pp.omega_b * i_gQ + (v_src - vD) / pp.l_g;
  dx[14] = -(pp.r_g / pp.l_g) * i_gQ - pp.omega_b * i_gD + (0.0 - vQ) / pp.l_g;
  dx[15] = -(pp.r_f / pp.l_f) * i_cDm + pp.omega_b * i_cQm + (vtD_m - vD) / pp.l_f;
  dx[16] = -(pp.r_f / pp.l_f) * i_cQm - pp.omega_b * i_cDm + (vtQ_m - vQ) / pp.l_f;
  dx[17] = -(pp.r_f / pp.l_f) * i_cDl + pp.omega_b * i_cQl + (vtD_l - vD) / pp.l_f;
  dx[18] = -(pp.r_f / pp.l_f) * i_cQl - pp.omega_b * i_cDl + (vtQ_l - vQ) / pp.l_f;
  return dx;
}

Eigen::MatrixXd NtiModel::jacobian(const Eigen::VectorXd& x) const {
  return fd_jacobian([this](const Eigen::VectorXd& s) { return rhs(s); }, x, 1e-7);
}

Eigen::VectorXd NtiTrajectory::series(const std::string& name) const {
  for (std::size_t j = 0; j < column_names.size(); ++j) {
    if (column_names[j] == name) return samples.col(static_cast<Eigen::Index>(j));
  }
  throw std::invalid_argument("NtiTrajectory::series: unknown column '" + name + "'");
}

NtiTrajectory nti_simulate(const NtiModel& model, const Eigen::VectorXd& x0,
                           double t_begin, double t_end, double dt) {
  const OdeResult ode = integrate_trapezoidal(
      [&model](const Eigen::VectorXd& x) { return model.rhs(x); }, x0, t_begin,
      t_end, dt);

  NtiTrajectory traj;
  traj.times = ode.times;
  traj.column_names = NtiModel::state_names();
  for (const std::string& name : NtiModel::output_names()) {
    traj.column_names.push_back(name);
  }
  const auto n_rows = static_cast<Eigen::Index>(ode.times.size());
  traj.samples.resize(n_rows, NtiModel::kStates + 12);
  for (Eigen::Index k = 0; k < n_rows; ++k) {
    const Eigen::VectorXd x = ode.states.row(k).transpose();
    traj.samples.block(k, 0, 1, NtiModel::kStates) = x.transpose();
    traj.samples.block(k, NtiModel::kStates, 1, 12) =
        model.outputs(x).transpose();
  }
  return traj;
}

}  // namespace mlstab
