#pragma once

#include "dqik/dualquat.hpp"

#include <Eigen/Core>

#include <string>
#include <vector>

namespace dqik {

/// Joint coordinates, one radian value per single-DOF joint.
using PoseVector = Eigen::VectorXd;

inline constexpr int kRoot = -1;

/// A single-DOF revolute joint. The local transform is a translation by
/// `offset` in the parent frame followed by a rotation about `axis`.
struct Joint {
  int id{0};
  int parent{kRoot};
  std::string name;
  Vector3d offset{Vector3d::Zero()};
  Axis axis{Axis::Z};
  double lower{-std::numbers::pi};
  double upper{std::numbers::pi};
};

struct EndEffector {
  int joint{0};
  Vector3d offset{Vector3d::Zero()};
};

struct Rig {
  std::vector<Joint> joints;
  std::vector<EndEffector> end_effectors;
  DualQuaterniond base{DualQuaterniond::identity()};

  int dof() const { return static_cast<int>(joints.size()); }
  int effector_count() const { return static_cast<int>(end_effectors.size()); }

  Eigen::VectorXd lower_limits() const;
  Eigen::VectorXd upper_limits() const;
  /// True when `ancestor` lies on the chain from the root to `joint` (inclusive).
  bool is_ancestor(int ancestor, int joint) const;
};

struct EndEffectorPose {
  Vector3d position{Vector3d::Zero()};
  Quaterniond orientation{Quaterniond::identity()};
};

/// Violated invariants, one message each; empty iff the rig is valid.
std::vector<std::string> rig_validate(const Rig& rig);

/// Local transform of joint `j` at coordinate `angle`.
DualQuaterniond joint_local_transform(const Joint& j, double angle);

/// World transform of every joint frame (after its own rotation).
std::vector<DualQuaterniond> forward_kinematics(const Rig& rig, const PoseVector& pose);

std::vector<EndEffectorPose> end_effector_poses(const Rig& rig, const PoseVector& pose);
std::vector<EndEffectorPose> end_effector_poses(const Rig& rig, const std::vector<DualQuaterniond>& world);

/// World transform of an end effector given the joint world transforms.
DualQuaterniond end_effector_transform(const Rig& rig, const std::vector<DualQuaterniond>& world, int effector);

/// Clamps every coordinate into its joint's [lower, upper].
PoseVector clamp_to_limits(const Rig& rig, const PoseVector& pose);
bool within_limits(const Rig& rig, const PoseVector& pose);

/// An anatomical joint with up to three rotational axes.
struct MultiDofJointSpec {
  std::string name;
  int parent{kRoot};  // index into the anatomical joint list
  Vector3d offset{Vector3d::Zero()};
  std::vector<Axis> axes;
  std::vector<double> lower;
  std::vector<double> upper;
};

/// Expands an n-axis joint into n chained 1-DOF joints joined by zero-length
/// links. The first joint gets `parent` and `first_id`; the others chain on.
std::vector<Joint> split_multi_dof(const MultiDofJointSpec& spec, int parent, int first_id);

struct HandAnatomy {
  std::vector<MultiDofJointSpec> joints;
  /// Fingertip effectors: anatomical joint index + tip offset.
  std::vector<std::pair<int, Vector3d>> tips;
  int link_count() const { return static_cast<int>(joints.size()) + 1; }
};

/// Anatomical hand description: 16 joints, 17 links.
HandAnatomy hand_anatomy();

/// Expands an anatomical description into a rig of 1-DOF joints.
Rig build_rig(const HandAnatomy& anatomy);

/// The reference 22-DOF hand. Effector 0 is the wrist, 1..5 thumb to little finger.
Rig build_hand_model();

}  // namespace dqik
