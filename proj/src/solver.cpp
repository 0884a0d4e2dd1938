#include "dqik/solver.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace dqik {

void validate_config(const SolverConfig& cfg) {
  auto positive = [](double v, const char* name) {
    if (!(v > 0) || !std::isfinite(v)) throw std::invalid_argument(std::string("config: ") + name + " must be positive");
  };
  positive(cfg.damping, "damping");
  positive(cfg.residual_tol, "residual_tol");
  positive(cfg.step_tol, "step_tol");
  positive(cfg.stall_tol, "stall_tol");
  positive(cfg.outer_error_tol, "outer_error_tol");
  positive(cfg.max_joint_step, "max_joint_step");
  positive(cfg.fd_delta, "fd_delta");
  if (cfg.max_iterations < 1) throw std::invalid_argument("config: max_iterations must be at least 1");
  if (cfg.outer_max_steps < 1) throw std::invalid_argument("config: outer_max_steps must be at least 1");
}

std::string_view to_string(PgsReason r) {
  switch (r) {
    case PgsReason::IterationLimit: return "max_iterations";
    case PgsReason::Residual: return "residual";
    case PgsReason::StepSize: return "step";
    case PgsReason::Stalled: return "stalled";
  }
  return "unknown";
}

std::string_view to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Running: return "running";
    case SolveStatus::Reached: return "reached";
    case SolveStatus::BestReach: return "best-reach";
    case SolveStatus::StepLimit: return "step-limit";
  }
  return "unknown";
}

NormalSystem assemble_normal_system(const JacobianMatrix& J, const ErrorVector& error, double damping) {
  if (J.rows() != error.size())
    throw std::invalid_argument("assemble_normal_system: Jacobian has " + std::to_string(J.rows()) +
                                " rows, error has " + std::to_string(error.size()));
  if (!(damping >= 0)) throw std::invalid_argument("assemble_normal_system: damping must be non-negative");
  const Eigen::Index n = J.cols();
  NormalSystem sys;
  sys.A = Eigen::MatrixXd::Zero(n, n);
  sys.A.selfadjointView<Eigen::Lower>().rankUpdate(J.transpose());
  sys.A.triangularView<Eigen::StrictlyUpper>() = sys.A.transpose();
  sys.A.diagonal().array() += damping;
  sys.b.noalias() = J.transpose() * error;
  return sys;
}

double projected_residual(const NormalSystem& sys, const Eigen::VectorXd& x, const Eigen::VectorXd& lower,
                          const Eigen::VectorXd& upper) {
  Eigen::VectorXd r = sys.A * x - sys.b;
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    if ((x[i] == lower[i] && r[i] > 0) || (x[i] == upper[i] && r[i] < 0)) r[i] = 0;
  }
  return r.norm();
}

PgsResult pgs_solve(const NormalSystem& sys, const Eigen::VectorXd& x0, const Eigen::VectorXd& lower,
                    const Eigen::VectorXd& upper, const SolverConfig& cfg) {
  const int n = sys.n();
  if (sys.A.rows() != n || sys.A.cols() != n || x0.size() != n || lower.size() != n || upper.size() != n)
    throw std::invalid_argument("pgs_solve: dimension mismatch");
  for (int i = 0; i < n; ++i) {
    if (sys.A(i, i) == 0.0) throw std::invalid_argument("pgs_solve: zero diagonal entry " + std::to_string(i));
    if (!(lower[i] <= upper[i])) throw std::invalid_argument("pgs_solve: lower bound exceeds upper bound");
  }

  PgsResult out;
  out.x = x0.cwiseMax(lower).cwiseMin(upper);
  Eigen::VectorXd& x = out.x;
  double previous_step = -1;
  for (int iter = 1; iter <= cfg.max_iterations; ++iter) {
    double step_sq = 0;
    for (int i = 0; i < n; ++i) {
      // dx_i = (b_i - sum_j A_ij x_j) / A_ii with x_j the latest values; the
      // j == i term makes x_i + dx_i the classic Gauss-Seidel update.
      const double dx = (sys.b[i] - sys.A.col(i).dot(x)) / sys.A(i, i);
      const double xi = std::clamp(x[i] + dx, lower[i], upper[i]);
      step_sq += (xi - x[i]) * (xi - x[i]);
      x[i] = xi;
    }
    const double step = std::sqrt(step_sq);
    out.iterations = iter;
    out.residual = projected_residual(sys, x, lower, upper);
    if (out.residual < cfg.residual_tol) {
      out.reason = PgsReason::Residual;
      break;
    }
    if (step < cfg.step_tol) {
      out.reason = PgsReason::StepSize;
      break;
    }
    if (previous_step >= 0 && std::abs(step - previous_step) < cfg.stall_tol) {
      out.reason = PgsReason::Stalled;
      break;
    }
    previous_step = step;
    out.reason = PgsReason::IterationLimit;
  }
  for (int i = 0; i < n; ++i) out.clamp_count += (x[i] == lower[i] || x[i] == upper[i]) ? 1 : 0;
  return out;
}

PgsResult pgs_solve(const NormalSystem& sys, const Eigen::VectorXd& x0, const SolverConfig& cfg) {
  const double inf = std::numeric_limits<double>::infinity();
  return pgs_solve(sys, x0, Eigen::VectorXd::Constant(sys.n(), -inf), Eigen::VectorXd::Constant(sys.n(), inf), cfg);
}

Eigen::VectorXd SolverState::warm_start_load(int n) const {
  if (cache_.size() != n) return Eigen::VectorXd::Zero(n);
  return cache_;
}

PoseVector ik_step(const Rig& rig, const PoseVector& pose_in, const GoalSet& goals, SolverState& state,
                   const SolverConfig& cfg) {
  const int n = rig.dof();
  if (pose_in.size() != n) throw std::invalid_argument("ik_step: pose size does not match rig DOF");
  const PoseVector pose = clamp_to_limits(rig, pose_in);

  const ErrorVector error = compute_error(rig, pose, goals);
  const JacobianMatrix J = cfg.jacobian == JacobianMode::Analytic ? jacobian_analytic(rig, pose, goals)
                                                                  : jacobian_fd(rig, pose, goals, cfg.fd_delta);

  // Joint limits and the step cap expressed as bounds on dw.
  Eigen::VectorXd lower(n), upper(n);
  for (int i = 0; i < n; ++i) {
    lower[i] = std::max(rig.joints[i].lower - pose[i], -cfg.max_joint_step);
    upper[i] = std::min(rig.joints[i].upper - pose[i], cfg.max_joint_step);
  }

  auto apply = [&](const Eigen::VectorXd& dw) {
    PoseVector next(n);
    for (int i = 0; i < n; ++i) {
      const Joint& j = rig.joints[i];
      const double w = pose[i] + dw[i];
      // Keep the implied rotation vector off the exp-map singular shell.
      const double shifted = expmap_regularize(Vector3d(w * axis_vector<double>(j.axis)))[static_cast<int>(j.axis)];
      next[i] = std::clamp(shifted, j.lower, j.upper);
    }
    return next;
  };

  const double before = error.norm();
  double damping = cfg.adaptive_damping ? state.damping(cfg.damping) : cfg.damping;
  double growth = 2;
  NormalSystem sys = assemble_normal_system(J, error, damping);
  Eigen::VectorXd x0 = cfg.warm_start ? state.warm_start_load(n) : Eigen::VectorXd::Zero(n);
  PgsResult solved = pgs_solve(sys, x0, lower, upper, cfg);
  PoseVector next = apply(solved.x);
  ErrorVector after = compute_error(rig, next, goals);
  int retries = 0;

  if (cfg.adaptive_damping) {
    // Levenberg-Marquardt style control on the damping: compare the actual
    // error reduction with the one the linear model predicts.
    while (true) {
      const double actual = 0.5 * (before * before - after.squaredNorm());
      const double predicted = 0.5 * (before * before - (error - J * solved.x).squaredNorm());
      if (after.norm() <= before && (actual > 0 || solved.x.isZero(0))) {
        const double rho = predicted > 0 ? actual / predicted : 1.0;
        const double shrink = std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * rho - 1.0, 3));
        state.set_damping(std::max(cfg.damping, damping * shrink), 2);
        break;
      }
      if (retries == cfg.max_damping_retries) {
        // No acceptable step at any damping tried; hold the pose.
        solved.x.setZero();
        next = pose;
        after = error;
        state.set_damping(damping, 2);
        break;
      }
      ++retries;
      damping = std::min(damping * growth, 1e12);
      growth *= 2;
      sys = assemble_normal_system(J, error, damping);
      solved = pgs_solve(sys, Eigen::VectorXd::Zero(n), lower, upper, cfg);
      next = apply(solved.x);
      after = compute_error(rig, next, goals);
    }
  }

  StepDiagnostics& d = state.diagnostics;
  d.error_norm_before = before;
  d.error_norm_after = after.norm();
  d.goal_errors = goal_error_norms(after);
  d.max_goal_error_after = d.goal_errors.empty() ? 0.0 : *std::max_element(d.goal_errors.begin(), d.goal_errors.end());
  d.pose_delta = n == 0 ? 0.0 : (next - pose_in).cwiseAbs().maxCoeff();
  d.iterations = solved.iterations;
  d.residual = solved.residual;
  d.clamp_count = solved.clamp_count;
  d.reason = solved.reason;
  d.damping = damping;
  d.damping_retries = retries;

  state.warm_start_store(solved.x);
  state.x = std::move(solved.x);
  return next;
}

SolveStatus ConvergenceMonitor::update(const StepDiagnostics& d, const SolverConfig& cfg) {
  recent_.push_back(d.pose_delta);
  if (static_cast<int>(recent_.size()) > window) recent_.erase(recent_.begin());
  if (d.max_goal_error_after < cfg.outer_error_tol) return SolveStatus::Reached;
  if (d.pose_delta < cfg.step_tol && static_cast<int>(recent_.size()) == window &&
      std::all_of(recent_.begin(), recent_.end(), [&](double v) { return v < 10 * cfg.step_tol; }))
    return SolveStatus::BestReach;
  return SolveStatus::Running;
}

SolveResult solve_to_convergence(const Rig& rig, const PoseVector& pose0, const GoalSet& goals,
                                 const SolverConfig& cfg, SolverState* state, long first_tick) {
  validate_config(cfg);
  validate_goals(rig, goals);
  SolverState local;
  SolverState& st = state ? *state : local;
  ConvergenceMonitor monitor;

  SolveResult result;
  result.pose = clamp_to_limits(rig, pose0);
  for (int step = 0; step < cfg.outer_max_steps; ++step) {
    result.pose = ik_step(rig, result.pose, goals, st, cfg);
    SolveStatus status = monitor.update(st.diagnostics, cfg);
    if (status == SolveStatus::Running && step + 1 == cfg.outer_max_steps) status = SolveStatus::StepLimit;
    result.trace.push_back({first_tick + step, result.pose, st.diagnostics.goal_errors, st.diagnostics.iterations, status});
    result.status = status;
    if (status != SolveStatus::Running) break;
  }
  return result;
}

}  // namespace dqik
