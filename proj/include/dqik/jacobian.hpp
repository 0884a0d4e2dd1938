#pragma once

#include "dqik/rig.hpp"

#include <Eigen/Core>

#include <vector>

namespace dqik {

/// Stacked 6-row blocks per goal: weighted position error (m) then weighted
/// orientation error as a rotation vector (rad).
using ErrorVector = Eigen::VectorXd;
using JacobianMatrix = Eigen::MatrixXd;

struct Goal {
  int effector{0};
  EndEffectorPose target;
  double pos_weight{1.0};
  double rot_weight{0.0};
};

struct GoalSet {
  std::vector<Goal> goals;

  int size() const { return static_cast<int>(goals.size()); }
  int rows() const { return 6 * size(); }
};

/// Throws std::invalid_argument naming the first violated goal invariant.
void validate_goals(const Rig& rig, const GoalSet& goals);

/// Rotation vector taking `from` onto `to` in the world frame: log(to * from^*).
Vector3d orientation_difference(const Quaterniond& to, const Quaterniond& from);

ErrorVector compute_error(const Rig& rig, const PoseVector& pose, const GoalSet& goals);
ErrorVector compute_error(const GoalSet& goals, const std::vector<EndEffectorPose>& current);

/// Norm of each goal's 6-row block.
std::vector<double> goal_error_norms(const ErrorVector& error);

/// Forward-difference Jacobian, one FK evaluation per column. Orientation
/// rows use the same rotation-vector difference as compute_error.
JacobianMatrix jacobian_fd(const Rig& rig, const PoseVector& pose, const GoalSet& goals, double delta = 1e-6);

/// Analytical Jacobian from the derivative of the dual-quaternion chain.
JacobianMatrix jacobian_analytic(const Rig& rig, const PoseVector& pose, const GoalSet& goals);

}  // namespace dqik
