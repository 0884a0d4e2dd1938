#pragma once

#include "dqik/jacobian.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

namespace dqik {

struct NormalSystem {
  Eigen::MatrixXd A;  // J^T J + damping I
  Eigen::VectorXd b;  // J^T de
  int n() const { return static_cast<int>(b.size()); }
};

enum class JacobianMode { Analytic, FiniteDifference };

struct SolverConfig {
  double damping{1e-4};
  int max_iterations{32};
  double residual_tol{1e-6};
  double step_tol{1e-8};
  double stall_tol{1e-12};
  int outer_max_steps{64};
  double outer_error_tol{1e-4};
  /// Per-step cap on |dw|_inf, keeps each update inside the exp-map safe region.
  double max_joint_step{std::numbers::pi / 2};
  JacobianMode jacobian{JacobianMode::Analytic};
  double fd_delta{1e-6};
  bool warm_start{true};
  /// Raise the damping above `damping` when a step would increase the
  /// error, and relax it back after steps that succeed.
  bool adaptive_damping{true};
  int max_damping_retries{12};
};

/// Throws std::invalid_argument if any field is out of range.
void validate_config(const SolverConfig& cfg);

enum class PgsReason { IterationLimit, Residual, StepSize, Stalled };
std::string_view to_string(PgsReason r);

struct PgsResult {
  Eigen::VectorXd x;
  int iterations{0};
  double residual{0};
  int clamp_count{0};
  PgsReason reason{PgsReason::IterationLimit};
};

NormalSystem assemble_normal_system(const JacobianMatrix& J, const ErrorVector& error, double damping);

/// ||Ax - b|| with the components held at an active bound (pushing outward)
/// dropped. Equals the plain residual when no bound is active.
double projected_residual(const NormalSystem& sys, const Eigen::VectorXd& x, const Eigen::VectorXd& lower,
                          const Eigen::VectorXd& upper);

/// Projected Gauss-Seidel on sys.A x = sys.b with box bounds, sweeping in
/// ascending index order starting from x0.
PgsResult pgs_solve(const NormalSystem& sys, const Eigen::VectorXd& x0, const Eigen::VectorXd& lower,
                    const Eigen::VectorXd& upper, const SolverConfig& cfg);

/// Unbounded convenience overload.
PgsResult pgs_solve(const NormalSystem& sys, const Eigen::VectorXd& x0, const SolverConfig& cfg);

struct StepDiagnostics {
  double error_norm_before{0};
  double error_norm_after{0};
  double max_goal_error_after{0};
  std::vector<double> goal_errors;  // per goal, after the step
  double pose_delta{0};             // |w_new - w_old|_inf
  double damping{0};                // damping used for the accepted solve
  int damping_retries{0};
  int iterations{0};
  double residual{0};
  int clamp_count{0};
  PgsReason reason{PgsReason::IterationLimit};
};

/// Warm-start cache plus the diagnostics of the most recent step.
class SolverState {
 public:
  /// Previous solution, or zeros on first use / size change.
  Eigen::VectorXd warm_start_load(int n) const;
  void warm_start_store(const Eigen::VectorXd& x) { cache_ = x; }
  void reset() {
    cache_.resize(0);
    damping_ = 0;
    growth_ = 2;
  }
  bool has_warm_start() const { return cache_.size() > 0; }

  /// Damping carried between steps by the adaptive rule; never below the
  /// configured floor.
  double damping(double floor) const { return std::max(damping_, floor); }
  void set_damping(double d, double growth) {
    damping_ = d;
    growth_ = growth;
  }
  double damping_growth() const { return growth_; }

  Eigen::VectorXd x;
  StepDiagnostics diagnostics;

 private:
  Eigen::VectorXd cache_;
  double damping_{0};
  double growth_{2};
};

/// One linearize-solve-update step. The returned pose is always inside the
/// joint limits.
PoseVector ik_step(const Rig& rig, const PoseVector& pose, const GoalSet& goals, SolverState& state,
                   const SolverConfig& cfg);

enum class SolveStatus { Running, Reached, BestReach, StepLimit };
std::string_view to_string(SolveStatus s);

struct StepRecord {
  long tick{0};
  PoseVector pose;
  std::vector<double> errors;
  int iterations{0};
  SolveStatus status{SolveStatus::Running};

  friend bool operator==(const StepRecord& a, const StepRecord& b) {
    return a.tick == b.tick && a.pose.size() == b.pose.size() && a.pose == b.pose && a.errors == b.errors &&
           a.iterations == b.iterations && a.status == b.status;
  }
};

using PoseTrace = std::vector<StepRecord>;

/// Tracks successive steps and decides when an outer solve is finished.
/// Best reach needs the pose to settle: the latest step moved less than
/// step_tol and the last `window` steps each moved less than 10 step_tol.
class ConvergenceMonitor {
 public:
  static constexpr int window = 5;

  SolveStatus update(const StepDiagnostics& d, const SolverConfig& cfg);
  void reset() { recent_.clear(); }

 private:
  std::vector<double> recent_;
};

struct SolveResult {
  PoseVector pose;
  PoseTrace trace;
  SolveStatus status{SolveStatus::Running};
};

/// Steps until the goals are met, the pose stops moving, or the step budget
/// runs out. `first_tick` numbers the first trace record.
SolveResult solve_to_convergence(const Rig& rig, const PoseVector& pose0, const GoalSet& goals,
                                 const SolverConfig& cfg, SolverState* state = nullptr, long first_tick = 1);

}  // namespace dqik
