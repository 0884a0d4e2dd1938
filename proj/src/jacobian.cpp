#include "dqik/jacobian.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dqik {

void validate_goals(const Rig& rig, const GoalSet& goals) {
  bool any_positive = false;
  for (int g = 0; g < goals.size(); ++g) {
    const Goal& goal = goals.goals[g];
    const std::string who = "goal " + std::to_string(g);
    if (goal.effector < 0 || goal.effector >= rig.effector_count())
      throw std::invalid_argument(who + ": effector " + std::to_string(goal.effector) + " does not exist (rig has " +
                                  std::to_string(rig.effector_count()) + ")");
    if (!(goal.pos_weight >= 0) || !(goal.rot_weight >= 0) || !std::isfinite(goal.pos_weight) ||
        !std::isfinite(goal.rot_weight))
      throw std::invalid_argument(who + ": weights must be finite and non-negative");
    if (!goal.target.position.allFinite()) throw std::invalid_argument(who + ": non-finite target position");
    if (!goal.target.orientation.is_unit(1e-6)) throw std::invalid_argument(who + ": orientation is not unit");
    any_positive = any_positive || goal.pos_weight > 0 || goal.rot_weight > 0;
  }
  if (!any_positive) throw std::invalid_argument("goal set has no positive weight");
}

Vector3d orientation_difference(const Quaterniond& to, const Quaterniond& from) {
  return quat_exp_to_expmap(to * from.conjugate());
}

ErrorVector compute_error(const GoalSet& goals, const std::vector<EndEffectorPose>& current) {
  ErrorVector e(goals.rows());
  for (int g = 0; g < goals.size(); ++g) {
    const Goal& goal = goals.goals[g];
    const EndEffectorPose& now = current.at(goal.effector);
    e.segment<3>(6 * g) = goal.pos_weight * (goal.target.position - now.position);
    e.segment<3>(6 * g + 3) = goal.rot_weight * orientation_difference(goal.target.orientation, now.orientation);
  }
  return e;
}

ErrorVector compute_error(const Rig& rig, const PoseVector& pose, const GoalSet& goals) {
  return compute_error(goals, end_effector_poses(rig, pose));
}

std::vector<double> goal_error_norms(const ErrorVector& error) {
  std::vector<double> out(error.size() / 6);
  for (std::size_t g = 0; g < out.size(); ++g) out[g] = error.segment<6>(6 * g).norm();
  return out;
}

JacobianMatrix jacobian_fd(const Rig& rig, const PoseVector& pose, const GoalSet& goals, double delta) {
  if (!(delta > 0)) throw std::invalid_argument("jacobian_fd: delta must be positive");
  const std::vector<EndEffectorPose> base = end_effector_poses(rig, pose);
  JacobianMatrix J(goals.rows(), rig.dof());
  PoseVector probe = pose;
  for (int j = 0; j < rig.dof(); ++j) {
    probe[j] = pose[j] + delta;
    const std::vector<EndEffectorPose> moved = end_effector_poses(rig, probe);
    probe[j] = pose[j];
    for (int g = 0; g < goals.size(); ++g) {
      const Goal& goal = goals.goals[g];
      const EndEffectorPose& a = base[goal.effector];
      const EndEffectorPose& b = moved[goal.effector];
      J.block<3, 1>(6 * g, j) = goal.pos_weight * (b.position - a.position) / delta;
      J.block<3, 1>(6 * g + 3, j) = goal.rot_weight * orientation_difference(b.orientation, a.orientation) / delta;
    }
  }
  return J;
}

JacobianMatrix jacobian_analytic(const Rig& rig, const PoseVector& pose, const GoalSet& goals) {
  const std::vector<DualQuaterniond> world = forward_kinematics(rig, pose);
  const int n = rig.dof();

  // For joint k the end transform is P L(w) S with P the parent world
  // transform and S = world_k^* end. Its derivative is P L'(w) S, so
  // H_k = P L'(w) world_k^* gives d(end)/dw_k = H_k end for every end below k.
  std::vector<DualQuaterniond> H(n);
  for (int k = 0; k < n; ++k) {
    const Joint& j = rig.joints[k];
    const double half = pose[k] / 2;
    Quaterniond dR{-0.5 * std::sin(half), 0, 0, 0};
    (&dR.x)[static_cast<int>(j.axis)] = 0.5 * std::cos(half);
    const DualQuaterniond dL{dR, 0.5 * (Quaterniond::pure(j.offset) * dR)};
    const DualQuaterniond& parent = j.parent == kRoot ? rig.base : world[j.parent];
    H[k] = parent * dL * world[k].conjugate();
  }

  JacobianMatrix J = JacobianMatrix::Zero(goals.rows(), n);
  for (int g = 0; g < goals.size(); ++g) {
    const Goal& goal = goals.goals[g];
    const int leaf = rig.end_effectors.at(goal.effector).joint;
    const DualQuaterniond end = end_effector_transform(rig, world, goal.effector);
    const Quaterniond t = Quaterniond::pure(dq_translation(end));
    const Quaterniond real_inv = end.real.conjugate();
    for (int k = leaf; k != kRoot; k = rig.joints[k].parent) {
      const DualQuaterniond d = H[k] * end;
      // t = 2 D R^*  =>  dt = (2 dD - t dR) R^*,  omega = 2 dR R^*
      const Vector3d dt = ((2.0 * d.dual - t * d.real) * real_inv).vec();
      const Vector3d omega = 2.0 * (d.real * real_inv).vec();
      J.block<3, 1>(6 * g, k) = goal.pos_weight * dt;
      J.block<3, 1>(6 * g + 3, k) = goal.rot_weight * omega;
    }
  }
  return J;
}

}  // namespace dqik
