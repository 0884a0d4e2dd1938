#include "dqik/rig.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace dqik {

Eigen::VectorXd Rig::lower_limits() const {
  Eigen::VectorXd v(dof());
  for (int i = 0; i < dof(); ++i) v[i] = joints[i].lower;
  return v;
}

Eigen::VectorXd Rig::upper_limits() const {
  Eigen::VectorXd v(dof());
  for (int i = 0; i < dof(); ++i) v[i] = joints[i].upper;
  return v;
}

bool Rig::is_ancestor(int ancestor, int joint) const {
  for (int j = joint; j != kRoot; j = joints[j].parent) {
    if (j == ancestor) return true;
  }
  return false;
}

std::vector<std::string> rig_validate(const Rig& rig) {
  std::vector<std::string> report;
  const int n = rig.dof();
  const double pi = std::numbers::pi;
  int roots = 0;
  for (int i = 0; i < n; ++i) {
    const Joint& j = rig.joints[i];
    const std::string who = "joint " + std::to_string(i) + (j.name.empty() ? "" : " (" + j.name + ")");
    if (j.id != i) report.push_back(who + ": id " + std::to_string(j.id) + " does not match its position");
    if (!(j.lower <= j.upper)) report.push_back(who + ": lower limit exceeds upper limit");
    if (j.lower < -pi || j.upper > pi) report.push_back(who + ": limits outside [-pi, pi]");
    if (!j.offset.allFinite()) report.push_back(who + ": non-finite offset");
    if (j.parent == kRoot) {
      ++roots;
    } else if (j.parent < 0 || j.parent >= n) {
      report.push_back(who + ": parent " + std::to_string(j.parent) + " does not exist");
    } else if (j.parent >= i) {
      report.push_back(who + ": parent " + std::to_string(j.parent) + " is not earlier in the joint list");
    }
  }
  if (n > 0 && roots != 1) report.push_back("rig has " + std::to_string(roots) + " roots, expected exactly one");

  // Cycle check on the parent graph, independent of the ordering rule above.
  for (int i = 0; i < n; ++i) {
    std::set<int> seen;
    int j = i;
    while (j != kRoot && j >= 0 && j < n) {
      if (!seen.insert(j).second) {
        report.push_back("cycle through joint " + std::to_string(i));
        break;
      }
      j = rig.joints[j].parent;
    }
  }

  for (int e = 0; e < rig.effector_count(); ++e) {
    const EndEffector& ee = rig.end_effectors[e];
    if (ee.joint < 0 || ee.joint >= n)
      report.push_back("end effector " + std::to_string(e) + ": joint " + std::to_string(ee.joint) +
                       " does not exist");
    if (!ee.offset.allFinite()) report.push_back("end effector " + std::to_string(e) + ": non-finite offset");
  }
  if (!rig.base.is_unit(1e-9)) report.push_back("base transform is not a unit dual quaternion");
  return report;
}

DualQuaterniond joint_local_transform(const Joint& j, double angle) {
  // T(offset) * R(angle about axis) == (R, 1/2 t R)
  return dq_from_rot_trans(quat_about(j.axis, angle), j.offset, TransformOrder::TransThenRot);
}

std::vector<DualQuaterniond> forward_kinematics(const Rig& rig, const PoseVector& pose) {
  if (pose.size() != rig.dof())
    throw std::invalid_argument("forward_kinematics: pose has " + std::to_string(pose.size()) +
                                " coordinates, rig has " + std::to_string(rig.dof()) + " DOF");
  std::vector<DualQuaterniond> world(rig.joints.size());
  for (int i = 0; i < rig.dof(); ++i) {
    const Joint& j = rig.joints[i];
    const DualQuaterniond& parent = j.parent == kRoot ? rig.base : world[j.parent];
    world[i] = parent * joint_local_transform(j, pose[i]);
  }
  return world;
}

DualQuaterniond end_effector_transform(const Rig& rig, const std::vector<DualQuaterniond>& world, int effector) {
  const EndEffector& ee = rig.end_effectors.at(effector);
  return world.at(ee.joint) * dq_pure_translation(ee.offset);
}

std::vector<EndEffectorPose> end_effector_poses(const Rig& rig, const std::vector<DualQuaterniond>& world) {
  std::vector<EndEffectorPose> out;
  out.reserve(rig.end_effectors.size());
  for (int e = 0; e < rig.effector_count(); ++e) {
    const DualQuaterniond t = end_effector_transform(rig, world, e);
    out.push_back({dq_translation(t), t.real});
  }
  return out;
}

std::vector<EndEffectorPose> end_effector_poses(const Rig& rig, const PoseVector& pose) {
  return end_effector_poses(rig, forward_kinematics(rig, pose));
}

PoseVector clamp_to_limits(const Rig& rig, const PoseVector& pose) {
  PoseVector out = pose;
  for (int i = 0; i < rig.dof(); ++i) out[i] = std::clamp(out[i], rig.joints[i].lower, rig.joints[i].upper);
  return out;
}

bool within_limits(const Rig& rig, const PoseVector& pose) {
  if (pose.size() != rig.dof()) return false;
  for (int i = 0; i < rig.dof(); ++i) {
    if (!(pose[i] >= rig.joints[i].lower && pose[i] <= rig.joints[i].upper)) return false;
  }
  return true;
}

std::vector<Joint> split_multi_dof(const MultiDofJointSpec& spec, int parent, int first_id) {
  const std::size_t n = spec.axes.size();
  if (n < 1 || n > 3) throw std::invalid_argument("split_multi_dof: " + spec.name + " must have 1 to 3 axes");
  if (spec.lower.size() != n || spec.upper.size() != n)
    throw std::invalid_argument("split_multi_dof: " + spec.name + " needs one limit pair per axis");
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b)
      if (spec.axes[a] == spec.axes[b])
        throw std::invalid_argument("split_multi_dof: " + spec.name + " repeats axis " + axis_name(spec.axes[a]));

  std::vector<Joint> out;
  for (std::size_t a = 0; a < n; ++a) {
    Joint j;
    j.id = first_id + static_cast<int>(a);
    j.parent = a == 0 ? parent : j.id - 1;
    j.name = n == 1 ? spec.name : spec.name + "_" + axis_name(spec.axes[a]);
    j.offset = a == 0 ? spec.offset : Vector3d::Zero();
    j.axis = spec.axes[a];
    j.lower = spec.lower[a];
    j.upper = spec.upper[a];
    out.push_back(std::move(j));
  }
  return out;
}

Rig build_rig(const HandAnatomy& anatomy) {
  Rig rig;
  // Last 1-DOF joint produced for each anatomical joint.
  std::vector<int> last(anatomy.joints.size(), kRoot);
  for (std::size_t a = 0; a < anatomy.joints.size(); ++a) {
    const MultiDofJointSpec& spec = anatomy.joints[a];
    const int parent = spec.parent == kRoot ? kRoot : last.at(spec.parent);
    for (Joint& j : split_multi_dof(spec, parent, rig.dof())) rig.joints.push_back(std::move(j));
    last[a] = rig.dof() - 1;
  }
  for (const auto& [joint, offset] : anatomy.tips) rig.end_effectors.push_back({last.at(joint), offset});
  return rig;
}

HandAnatomy hand_anatomy() {
  // Fingers extend along +x with the palm facing -z. Flexion is about +y
  // (curls toward the palm), abduction about z. Lengths in meters; limits
  // are round anatomical defaults.
  constexpr double flex_hi = std::numbers::pi / 2;
  constexpr double flex_lo = -0.1;
  constexpr double abd = 0.35;

  HandAnatomy h;
  h.joints.push_back({"wrist", kRoot, Vector3d::Zero(), {Axis::Y, Axis::Z}, {-1.0, -1.0}, {1.0, 1.0}});

  // Thumb: CMC (2), MCP (1), IP (1).
  h.joints.push_back({"thumb_cmc", 0, {0.025, 0.02, -0.01}, {Axis::Z, Axis::Y}, {-0.2, -0.5}, {0.8, 0.8}});
  h.joints.push_back({"thumb_mcp", 1, {0.035, 0.03, 0.0}, {Axis::Y}, {flex_lo}, {flex_hi}});
  h.joints.push_back({"thumb_ip", 2, {0.025, 0.02, 0.0}, {Axis::Y}, {flex_lo}, {flex_hi}});
  h.tips.push_back({3, {0.02, 0.015, 0.0}});

  struct Finger {
    const char* name;
    double y;
    double palm, proximal, middle, tip;
  };
  const Finger fingers[] = {
      {"index", 0.028, 0.092, 0.045, 0.025, 0.020},
      {"middle", 0.009, 0.090, 0.050, 0.030, 0.022},
      {"ring", -0.010, 0.085, 0.046, 0.028, 0.020},
      {"little", -0.028, 0.078, 0.036, 0.020, 0.018},
  };
  for (const Finger& f : fingers) {
    const int mcp = static_cast<int>(h.joints.size());
    const std::string n = f.name;
    h.joints.push_back({n + "_mcp", 0, {f.palm, f.y, 0.0}, {Axis::Y, Axis::Z}, {flex_lo, -abd}, {flex_hi, abd}});
    h.joints.push_back({n + "_pip", mcp, {f.proximal, 0.0, 0.0}, {Axis::Y}, {flex_lo}, {flex_hi}});
    h.joints.push_back({n + "_dip", mcp + 1, {f.middle, 0.0, 0.0}, {Axis::Y}, {flex_lo}, {flex_hi}});
    h.tips.push_back({mcp + 2, {f.tip, 0.0, 0.0}});
  }
  return h;
}

Rig build_hand_model() {
  const HandAnatomy anatomy = hand_anatomy();
  Rig rig = build_rig(anatomy);
  // Wrist effector on the last wrist DOF, ahead of the fingertips.
  rig.end_effectors.insert(rig.end_effectors.begin(), EndEffector{1, Vector3d::Zero()});
  return rig;
}

}  // namespace dqik
