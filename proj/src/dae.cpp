// ============================================================================
// dae.cpp — consistent initialization and implicit DAE time stepping.
// ============================================================================
#include "mlstab/dae.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "mlstab/jacobian.hpp"
#include "mlstab/model_io.hpp"

namespace mlstab {

namespace {

constexpr double kNewtonWrmsTol = 1e-2;       // weighted-update acceptance
constexpr double kInitialResidualTol = 1e-6;  // v0 consistency gate
constexpr double kLineSearchSlope = 1e-4;     // Armijo-style decrease factor
constexpr int kMaxHalvings = 10;              // max_step / 2^10 = /1024
constexpr double kEventTimeTol = 1e-9;        // event-time matching window

[[nodiscard]] double wrms_norm(const Eigen::VectorXd& delta,
                               const Eigen::VectorXd& x,
                               double rel_tol, double abs_tol) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < delta.size(); ++i) {
    const double w = 1.0 / (abs_tol + rel_tol * std::abs(x[i]));
    const double e = delta[i] * w;
    acc += e * e;
  }
  return std::sqrt(acc / static_cast<double>(std::max<Eigen::Index>(delta.size(), 1)));
}

}  // namespace

// ============================================================================
// Step method names
// ============================================================================

StepMethod step_method_from_string(const std::string& name) {
  if (name == "trapezoidal") return StepMethod::trapezoidal;
  if (name == "implicit-euler" || name == "implicit_euler")
    return StepMethod::implicit_euler;
  throw std::invalid_argument("unknown integration method '" + name +
                              "' (expected trapezoidal or implicit-euler)");
}

std::string to_string(StepMethod method) {
  return method == StepMethod::trapezoidal ? "trapezoidal" : "implicit-euler";
}

// ============================================================================
// Trajectory accessors
// ============================================================================

Eigen::VectorXd Trajectory::at(std::size_t k) const {
  if (k >= times.size())
    throw std::out_of_range("trajectory sample index out of range");
  return samples.row(static_cast<Eigen::Index>(k)).transpose();
}

Eigen::Index Trajectory::column_of(const std::string& name) const {
  for (std::size_t i = 0; i < signal_names.size(); ++i)
    if (signal_names[i] == name) return static_cast<Eigen::Index>(i);
  throw std::invalid_argument("trajectory has no signal named '" + name + "'");
}

Eigen::VectorXd Trajectory::series(const std::string& name) const {
  return samples.col(column_of(name));
}

std::size_t Trajectory::index_at_time(double t) const {
  if (times.empty() || t < times.front() - 1e-12)
    throw std::invalid_argument("requested time precedes the trajectory");
  std::size_t k = 0;
  while (k + 1 < times.size() && times[k + 1] <= t + 1e-12) ++k;
  return k;
}

// ============================================================================
// Consistent initialization
// ============================================================================

namespace {

[[nodiscard]] Eigen::VectorXd init_residual(const Cpn1Model& model,
                                            const Eigen::VectorXd& v,
                                            bool include_lifts) {
  Eigen::VectorXd h(model.n_phi());
  eval_residual_into(model, v, h);
  if (!include_lifts || model.lifts().empty()) return h;
  Eigen::VectorXd f(h.size() + static_cast<Eigen::Index>(model.lifts().size()));
  f.head(h.size()) = h;
  f.tail(static_cast<Eigen::Index>(model.lifts().size())) = model.lift_residual(v);
  return f;
}

}  // namespace

SignalVector consistent_init(const Cpn1Model& model, const SignalVector& guess,
                             const std::vector<std::string>& frozen,
                             const InitOptions& options) {
  check_compatible(model, guess);
  const SignalPartition& part = *guess.partition;
  const Eigen::Index n_v = model.n_v();

  std::vector<bool> is_frozen(static_cast<std::size_t>(n_v), false);
  for (const std::string& name : frozen)
    is_frozen[static_cast<std::size_t>(part.index_of(name))] = true;

  std::vector<Eigen::Index> free_idx;
  for (Eigen::Index i = 0; i < n_v; ++i)
    if (!is_frozen[static_cast<std::size_t>(i)]) free_idx.push_back(i);
  if (free_idx.empty())
    throw std::invalid_argument("consistent_init: every signal is frozen");

  const bool lifts_on = options.include_lifts && !model.lifts().empty();
  const Eigen::Index n_lift = lifts_on ? static_cast<Eigen::Index>(model.lifts().size()) : 0;
  const Eigen::Index n_rows = model.n_phi() + n_lift;
  const Eigen::Index n_free = static_cast<Eigen::Index>(free_idx.size());

  Eigen::VectorXd v = guess.values;
  Eigen::VectorXd f = init_residual(model, v, lifts_on);
  if (f.lpNorm<Eigen::Infinity>() <= options.tol) {
    SignalVector out = guess;
    return out;  // already consistent; nothing to solve
  }

  int bad_streak = 0;
  for (int iter = 0; iter < options.max_iters; ++iter) {
    OperatingPoint point;
    point.v_bar = SignalVector{v, guess.partition};
    const Eigen::MatrixXd j_full = jacobian(model, point).j;

    Eigen::MatrixXd j_free = Eigen::MatrixXd::Zero(n_rows, n_free);
    for (Eigen::Index c = 0; c < n_free; ++c)
      j_free.col(c).head(model.n_phi()) = j_full.col(free_idx[static_cast<std::size_t>(c)]);
    if (lifts_on) {
      for (Eigen::Index k = 0; k < n_lift; ++k) {
        const LiftPair& lift = model.lifts()[static_cast<std::size_t>(k)];
        for (Eigen::Index c = 0; c < n_free; ++c) {
          const Eigen::Index col = free_idx[static_cast<std::size_t>(c)];
          if (col == lift.cos_index) j_free(model.n_phi() + k, c) = 2.0 * v[col];
          if (col == lift.sin_index) j_free(model.n_phi() + k, c) = 2.0 * v[col];
        }
      }
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(j_free);
    if (qr.rank() < n_free) {
      // Identify equations that cannot be reduced: nonzero residual with a
      // (numerically) zero gradient over the free unknowns.
      std::string deficient;
      for (Eigen::Index r = 0; r < model.n_phi(); ++r) {
        if (std::abs(f[r]) > options.tol &&
            j_free.row(r).lpNorm<Eigen::Infinity>() < 1e-14) {
          if (!deficient.empty()) deficient += ", ";
          deficient += model.equation_names().empty()
                           ? ("eq" + std::to_string(r))
                           : model.equation_names()[static_cast<std::size_t>(r)];
        }
      }
      std::ostringstream msg;
      msg << "consistent_init: singular iteration matrix (rank " << qr.rank()
          << " < " << n_free << " free unknowns)";
      if (!deficient.empty()) msg << "; deficient equations: " << deficient;
      throw std::runtime_error(msg.str());
    }

    const Eigen::VectorXd delta = qr.solve(-f);
    const double f_norm = f.norm();

    double lambda = 1.0;
    bool improved = false;
    Eigen::VectorXd v_trial;
    Eigen::VectorXd f_trial;
    for (int ls = 0; ls < 7; ++ls) {
      v_trial = v;
      for (Eigen::Index c = 0; c < n_free; ++c)
        v_trial[free_idx[static_cast<std::size_t>(c)]] += lambda * delta[c];
      f_trial = init_residual(model, v_trial, lifts_on);
      if (f_trial.norm() < f_norm * (1.0 - kLineSearchSlope * lambda)) {
        improved = true;
        break;
      }
      lambda *= 0.5;
    }

    if (!improved) {
      if (++bad_streak >= 3) {
        std::ostringstream msg;
        msg << "consistent_init: Newton iteration stalled after " << iter + 1
            << " iterations; final residual " << std::scientific
            << f.lpNorm<Eigen::Infinity>();
        throw std::runtime_error(msg.str());
      }
      v = v_trial;  // take the smallest damped step and keep going
      f = f_trial;
    } else {
      bad_streak = 0;
      v = v_trial;
      f = f_trial;
    }

    if (f.lpNorm<Eigen::Infinity>() <= options.tol) {
      SignalVector out{v, guess.partition};
      return out;
    }
  }

  std::ostringstream msg;
  msg << "consistent_init: no convergence after " << options.max_iters
      << " iterations; final residual " << std::scientific
      << f.lpNorm<Eigen::Infinity>();
  throw std::runtime_error(msg.str());
}

// ============================================================================
// Simulation
// ============================================================================

namespace {

/// Re-solves (zdot, y, alpha) at fixed states and inputs; used to restart the
/// integrator cleanly after a discontinuous input event.
void reinitialize_after_event(const Cpn1Model& model, SignalVector& v) {
  const SignalPartition& part = *v.partition;
  std::vector<std::string> frozen;
  frozen.reserve(static_cast<std::size_t>(part.n + part.m));
  for (Eigen::Index i = 0; i < part.n; ++i)
    frozen.push_back(part.names[static_cast<std::size_t>(part.z_begin() + i)]);
  for (Eigen::Index i = 0; i < part.m; ++i)
    frozen.push_back(part.names[static_cast<std::size_t>(part.u_begin() + i)]);
  InitOptions options;
  options.tol = 1e-9;
  v = consistent_init(model, v, frozen, options);
}

}  // namespace

Trajectory simulate(const Cpn1Model& model, const SignalVector& v0,
                    const std::vector<InputEvent>& schedule, double t_begin,
                    double t_end, const SolverConfig& config,
                    EvalBackend backend) {
  check_compatible(model, v0);
  const SignalPartition& part = *v0.partition;
  const Eigen::Index n = part.n;
  const Eigen::Index n_unknown = part.n + part.p + part.q;

  if (model.n_phi() != n_unknown)
    throw std::invalid_argument(
        "simulate: model is not square (" + std::to_string(model.n_phi()) +
        " equations for " + std::to_string(n_unknown) +
        " per-step unknowns); only square DAEs can be integrated");
  if (!(t_end > t_begin))
    throw std::invalid_argument("simulate: t_end must exceed t_begin");
  if (config.max_step <= 0.0)
    throw std::invalid_argument("simulate: max_step must be positive");
  if (config.jacobian_refresh_every < 1)
    throw std::invalid_argument("simulate: jacobian_refresh_every must be >= 1");

  // Sorted event list; entries at or before t_begin apply immediately.
  std::vector<InputEvent> events = schedule;
  std::stable_sort(events.begin(), events.end(),
                   [](const InputEvent& a, const InputEvent& b) { return a.t < b.t; });
  for (const InputEvent& ev : events) {
    const Eigen::Index idx = part.index_of(ev.signal);
    if (idx < part.u_begin() || idx >= part.y_begin())
      throw std::invalid_argument("simulate: event signal '" + ev.signal +
                                  "' is not an input");
  }

  SignalVector state = v0;
  std::size_t next_event = 0;
  bool pre_applied = false;
  while (next_event < events.size() &&
         events[next_event].t <= t_begin + kEventTimeTol) {
    state.values[part.index_of(events[next_event].signal)] =
        events[next_event].value;
    ++next_event;
    pre_applied = true;
  }

  const Eigen::VectorXd h0 = eval_residual(model, state, backend);
  if (h0.lpNorm<Eigen::Infinity>() > kInitialResidualTol) {
    if (pre_applied) {
      reinitialize_after_event(model, state);
    } else {
      std::ostringstream msg;
      msg << "simulate: initial point is inconsistent (|h| = " << std::scientific
          << h0.lpNorm<Eigen::Infinity>() << "); run consistent_init first";
      throw std::invalid_argument(msg.str());
    }
  }

  Trajectory traj;
  traj.signal_names = part.names;
  std::vector<Eigen::VectorXd> rows;
  rows.reserve(static_cast<std::size_t>((t_end - t_begin) / config.max_step) + 8);

  auto push_sample = [&](double t, const Eigen::VectorXd& v) {
    traj.times.push_back(t);
    rows.push_back(v);
    traj.drift.push_back(lift_drift(model, v));
  };
  push_sample(t_begin, state.values);

  // Unknown vector x = (z, y, alpha); v assembled from x plus the divided
  // difference for zdot and the held inputs.
  Eigen::VectorXd v_work = state.values;
  Eigen::VectorXd z_prev = state.values.segment(part.z_begin(), n);
  Eigen::VectorXd zdot_prev = state.values.segment(part.zdot_begin(), n);

  auto scatter_unknowns = [&](const Eigen::VectorXd& x, double c, bool trap) {
    v_work.segment(part.z_begin(), n) = x.head(n);
    if (trap)
      v_work.segment(part.zdot_begin(), n) =
          c * (x.head(n) - z_prev) - zdot_prev;
    else
      v_work.segment(part.zdot_begin(), n) = c * (x.head(n) - z_prev);
    v_work.segment(part.y_begin(), part.p + part.q) = x.tail(part.p + part.q);
  };

  Eigen::PartialPivLU<Eigen::MatrixXd> lu;
  bool have_lu = false;
  double lu_c = 0.0;
  long steps_since_factor = 0;

  auto factor_matrix = [&](double c) {
    OperatingPoint point;
    point.v_bar = SignalVector{v_work, v0.partition};
    const Eigen::MatrixXd j = jacobian(model, point, backend).j;
    Eigen::MatrixXd m(model.n_phi(), n_unknown);
    m.leftCols(n) = c * j.middleCols(part.zdot_begin(), n) +
                    j.middleCols(part.z_begin(), n);
    m.rightCols(part.p + part.q) = j.middleCols(part.y_begin(), part.p + part.q);
    lu.compute(m);
    have_lu = true;
    lu_c = c;
    steps_since_factor = 0;
    ++traj.stats.jacobian_factorizations;
  };

  const bool trap = config.method == StepMethod::trapezoidal;
  const double t_span = t_end - t_begin;
  double t = t_begin;
  double h_cur = std::min(config.max_step, t_span);
  int halvings = 0;
  long ok_streak = 0;
  Eigen::VectorXd x(n_unknown), residual(model.n_phi());

  while (t < t_end - 1e-12 * t_span) {
    double boundary = t_end;
    if (next_event < events.size())
      boundary = std::min(boundary, events[next_event].t);
    double dt = std::min(h_cur, boundary - t);
    if (boundary - t - dt < 1e-12 * t_span) dt = boundary - t;

    const double c = (trap ? 2.0 : 1.0) / dt;

    // Predictor: explicit Euler on states, hold algebraics.
    x.head(n) = z_prev + dt * zdot_prev;
    x.tail(part.p + part.q) =
        v_work.segment(part.y_begin(), part.p + part.q);
    scatter_unknowns(x, c, trap);

    bool need_factor = !have_lu || steps_since_factor >= config.jacobian_refresh_every ||
                       std::abs(c - lu_c) > 1e-12 * c;
    bool converged = false;
    bool refactored_retry = false;

    for (int attempt = 0; attempt < 2 && !converged; ++attempt) {
      if (need_factor) factor_matrix(c);
      double r0_norm = -1.0;
      for (int it = 0; it < config.newton_max_iters; ++it) {
        eval_residual_into(model, v_work, residual, backend);
        const double r_norm = residual.lpNorm<Eigen::Infinity>();
        if (!std::isfinite(r_norm)) break;
        if (r0_norm < 0.0) r0_norm = r_norm;
        if (r_norm <= config.newton_tol) {
          converged = true;
          break;
        }
        if (r_norm > 1e4 * (r0_norm + 1.0)) break;  // diverging
        const Eigen::VectorXd delta = lu.solve(-residual);
        if (!delta.allFinite()) break;
        x += delta;
        scatter_unknowns(x, c, trap);
        ++traj.stats.newton_iterations;
        if (wrms_norm(delta, x, config.rel_tol, config.abs_tol) <= kNewtonWrmsTol) {
          converged = true;
          break;
        }
      }
      if (!converged && !refactored_retry) {
        // One retry with a fresh factorization at the current iterate.
        need_factor = true;
        refactored_retry = true;
        x.head(n) = z_prev + dt * zdot_prev;
        x.tail(part.p + part.q) =
            v_work.segment(part.y_begin(), part.p + part.q);
        scatter_unknowns(x, c, trap);
      } else {
        break;
      }
    }

    if (!converged) {
      ++traj.stats.steps_rejected;
      have_lu = false;
      ok_streak = 0;
      if (halvings >= kMaxHalvings) {
        traj.completed = false;
        std::ostringstream msg;
        msg << "step size underflow at t = " << t << " (dt = " << dt
            << "); Newton failed to converge";
        traj.diagnostic = msg.str();
        break;
      }
      h_cur *= 0.5;
      ++halvings;
      continue;
    }

    // Accept the step.
    t += dt;
    ++traj.stats.steps_accepted;
    ++steps_since_factor;
    if (halvings > 0 && ++ok_streak >= 8) {
      h_cur = std::min(2.0 * h_cur, config.max_step);
      --halvings;
      ok_streak = 0;
    }

    if (config.project_lifts) {
      for (const LiftPair& lift : model.lifts()) {
        const double zc = v_work[lift.cos_index];
        const double zs = v_work[lift.sin_index];
        const double norm = std::hypot(zc, zs);
        if (norm > 1e-30) {
          v_work[lift.cos_index] = zc / norm;
          v_work[lift.sin_index] = zs / norm;
        }
      }
    }

    bool event_here = false;
    while (next_event < events.size() &&
           events[next_event].t <= t + kEventTimeTol) {
      v_work[part.index_of(events[next_event].signal)] =
          events[next_event].value;
      ++next_event;
      event_here = true;
    }
    if (event_here) {
      SignalVector point{v_work, v0.partition};
      reinitialize_after_event(model, point);
      v_work = point.values;
      have_lu = false;  // iteration matrix is stale across the discontinuity
    }

    push_sample(t, v_work);
    z_prev = v_work.segment(part.z_begin(), n);
    zdot_prev = v_work.segment(part.zdot_begin(), n);
  }

  traj.samples.resize(static_cast<Eigen::Index>(rows.size()), model.n_v());
  for (std::size_t k = 0; k < rows.size(); ++k)
    traj.samples.row(static_cast<Eigen::Index>(k)) = rows[k].transpose();
  return traj;
}

// ============================================================================
// Drift metrics
// ============================================================================

double lift_drift(const Cpn1Model& model, const Eigen::VectorXd& v) {
  if (model.lifts().empty()) return 0.0;
  return model.lift_residual(v).cwiseAbs().maxCoeff();
}

double drift_metric(const Trajectory& traj) {
  double worst = 0.0;
  for (double d : traj.drift) worst = std::max(worst, d);
  return worst;
}

// ============================================================================
// CSV export
// ============================================================================

std::string trajectory_to_csv(const Trajectory& traj, bool long_format) {
  std::ostringstream out;
  out << std::setprecision(17);
  if (long_format) {
    out << "t,signal,value\n";
    for (std::size_t k = 0; k < traj.times.size(); ++k)
      for (std::size_t i = 0; i < traj.signal_names.size(); ++i)
        out << traj.times[k] << ',' << traj.signal_names[i] << ','
            << traj.samples(static_cast<Eigen::Index>(k),
                            static_cast<Eigen::Index>(i))
            << '\n';
    return out.str();
  }
  out << "t";
  for (const std::string& name : traj.signal_names) out << ',' << name;
  out << '\n';
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    out << traj.times[k];
    for (Eigen::Index i = 0; i < traj.samples.cols(); ++i)
      out << ',' << traj.samples(static_cast<Eigen::Index>(k), i);
    out << '\n';
  }
  return out.str();
}

void save_trajectory_csv(const Trajectory& traj, const std::string& path,
                         bool long_format) {
  write_text_file(path, trajectory_to_csv(traj, long_format));
}

}  // namespace mlstab
