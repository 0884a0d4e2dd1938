#include "dqik/rig.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numbers>

using namespace dqik;
using namespace dqik::testing;

namespace {

constexpr double pi = std::numbers::pi;

bool report_mentions(const std::vector<std::string>& report, const std::string& needle) {
  return std::any_of(report.begin(), report.end(), [&](const std::string& s) { return s.find(needle) != s.npos; });
}

/// Straight chain of `links` z-joints, offsets (1,0,0) from an origin root.
Rig straight_chain(int links) {
  Rig rig;
  for (int i = 0; i < links; ++i) rig.joints.push_back({i, i - 1, "j" + std::to_string(i), {1, 0, 0}, Axis::Z, -pi, pi});
  rig.end_effectors.push_back({links - 1, Vector3d::Zero()});
  return rig;
}

}  // namespace

// ---- rig_validate ------------------------------------------------------

TEST(RigValidate, ValidChain) { EXPECT_TRUE(rig_validate(planar_chain(3)).empty()); }

TEST(RigValidate, LowerAboveUpper) {
  Rig rig = planar_chain(3);
  rig.joints[1].lower = 1.0;
  rig.joints[1].upper = 0.5;
  const auto report = rig_validate(rig);
  ASSERT_EQ(report.size(), 1u);
  EXPECT_TRUE(report_mentions(report, "joint 1 (link1)"));
  EXPECT_TRUE(report_mentions(report, "lower limit exceeds upper"));
}

TEST(RigValidate, Cycle) {
  Rig rig = planar_chain(3);
  rig.joints[1].parent = 2;
  rig.joints[2].parent = 1;
  EXPECT_TRUE(report_mentions(rig_validate(rig), "cycle"));
}

TEST(RigValidate, OtherViolations) {
  Rig rig = planar_chain(3);
  rig.joints[2].upper = 4.0;
  rig.joints[1].parent = kRoot;
  rig.end_effectors.push_back({7, Vector3d::Zero()});
  rig.base.dual = Quaterniond{1, 0, 0, 0};
  const auto report = rig_validate(rig);
  EXPECT_TRUE(report_mentions(report, "outside [-pi, pi]"));
  EXPECT_TRUE(report_mentions(report, "2 roots"));
  EXPECT_TRUE(report_mentions(report, "end effector 1: joint 7"));
  EXPECT_TRUE(report_mentions(report, "base transform"));
  EXPECT_EQ(report.size(), 4u);
}

TEST(RigValidate, ParentMustComeFirst) {
  Rig rig = planar_chain(3);
  rig.joints[0].parent = 1;
  rig.joints[1].parent = kRoot;
  EXPECT_TRUE(report_mentions(rig_validate(rig), "not earlier"));
}

// ---- forward kinematics ------------------------------------------------

TEST(ForwardKinematics, StraightTranslationChain) {
  const Rig rig = straight_chain(3);
  const auto world = forward_kinematics(rig, PoseVector::Zero(3));
  for (int i = 0; i < 3; ++i) EXPECT_EQ(dq_translation(world[i]), Vector3d(i + 1, 0, 0));
}

TEST(ForwardKinematics, PlanarChainMatchesMatrices) {
  const Rig rig = planar_chain(3);
  Rng rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    const PoseVector pose = random_pose(rig, rng);
    const auto world = forward_kinematics(rig, pose);
    const auto oracle = matrix_fk(rig, pose);
    for (int i = 0; i < 3; ++i) EXPECT_LE((to_matrix(world[i]) - oracle[i]).cwiseAbs().maxCoeff(), 1e-12);
    // Planar closed form for the tip.
    const double a = pose[0], b = pose[0] + pose[1], c = b + pose[2];
    const Vector3d tip(std::cos(a) + std::cos(b) + std::cos(c), std::sin(a) + std::sin(b) + std::sin(c), 0);
    EXPECT_LE((end_effector_poses(rig, pose)[0].position - tip).norm(), 1e-12);
  }
}

TEST(ForwardKinematics, SingleJointQuarterTurn) {
  Rig rig;
  rig.joints.push_back({0, kRoot, "j", {1, 0, 0}, Axis::Z, -pi, pi});
  rig.end_effectors.push_back({0, {1, 0, 0}});
  PoseVector pose(1);
  pose << pi / 2;
  const Vector3d p = end_effector_poses(rig, pose)[0].position;
  EXPECT_LE((p - Vector3d(1, 1, 0)).norm(), 1e-15);
  EXPECT_LE((p - matrix_effector_position(rig, matrix_fk(rig, pose), 0)).norm(), 1e-15);
}

TEST(ForwardKinematics, RejectsWrongPoseLength) {
  EXPECT_THROW(forward_kinematics(planar_chain(3), PoseVector::Zero(2)), std::invalid_argument);
}

TEST(ForwardKinematics, RandomRigsMatchMatrixPipeline) {
  Rng rng(32);
  for (int trial = 0; trial < 1000; ++trial) {
    const Rig rig = random_rig(rng, 1 + trial % 12);
    ASSERT_TRUE(rig_validate(rig).empty());
    const PoseVector pose = random_pose(rig, rng);
    const auto world = forward_kinematics(rig, pose);
    const auto oracle = matrix_fk(rig, pose);
    for (int i = 0; i < rig.dof(); ++i) {
      EXPECT_LE((dq_translation(world[i]) - oracle[i].topRightCorner<3, 1>()).norm(), 1e-8);
      EXPECT_LE(max_abs_diff_up_to_sign(world[i].real, from_matrix(oracle[i].topLeftCorner<3, 3>())), 1e-8);
    }
    const auto poses = end_effector_poses(rig, pose);
    for (int e = 0; e < rig.effector_count(); ++e)
      EXPECT_LE((poses[e].position - matrix_effector_position(rig, oracle, e)).norm(), 1e-8);
  }
}

TEST(ForwardKinematics, UnityConditionOnLongChains) {
  Rng rng(33);
  for (int links = 1; links <= 32; ++links) {
    const Rig rig = random_rig(rng, links, true);
    for (int trial = 0; trial < 10; ++trial) {
      for (const DualQuaterniond& d : forward_kinematics(rig, random_pose(rig, rng))) {
        EXPECT_TRUE(d.is_unit(1e-9));
        EXPECT_LT(d.unity_residual().norm(), 1e-9);
      }
    }
  }
}

TEST(ForwardKinematics, Deterministic) {
  Rng rng(34);
  const Rig rig = random_rig(rng, 20);
  const PoseVector pose = random_pose(rig, rng);
  const auto a = forward_kinematics(rig, pose);
  const auto b = forward_kinematics(rig, pose);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
}

TEST(ForwardKinematics, PerturbationOnlyMovesSubtree) {
  Rng rng(35);
  for (int trial = 0; trial < 200; ++trial) {
    const Rig rig = random_rig(rng, 15);
    const PoseVector pose = random_pose(rig, rng);
    const int k = std::uniform_int_distribution<int>(0, rig.dof() - 1)(rng);
    PoseVector moved = pose;
    moved[k] += 0.3;
    const auto a = forward_kinematics(rig, pose);
    const auto b = forward_kinematics(rig, moved);
    for (int i = 0; i < rig.dof(); ++i) {
      if (rig.is_ancestor(k, i))
        EXPECT_GT(max_abs_diff(a[i], b[i]), 0.0) << "joint " << i << " should move with " << k;
      else
        EXPECT_EQ(a[i], b[i]) << "joint " << i << " is outside the subtree of " << k;
    }
  }
}

// ---- end effectors -----------------------------------------------------

TEST(EndEffectorPoses, ZeroPoseIsCumulativeOffsets) {
  const Rig rig = straight_chain(4);
  EXPECT_EQ(end_effector_poses(rig, PoseVector::Zero(4))[0].position, Vector3d(4, 0, 0));
}

TEST(EndEffectorPoses, MatchesTranslationOfComposedTransform) {
  Rng rng(36);
  const Rig rig = random_rig(rng, 10);
  const PoseVector pose = random_pose(rig, rng);
  const auto world = forward_kinematics(rig, pose);
  const auto poses = end_effector_poses(rig, world);
  for (int e = 0; e < rig.effector_count(); ++e) {
    const DualQuaterniond t = world[rig.end_effectors[e].joint] * dq_pure_translation(rig.end_effectors[e].offset);
    const RotTrans<double> rt = dq_to_rot_trans(t, TransformOrder::TransThenRot);
    EXPECT_LE((poses[e].position - rt.translation).norm(), 1e-12);
    EXPECT_LE(max_abs_diff(poses[e].orientation, rt.rotation), 0);
    EXPECT_TRUE(poses[e].orientation.is_unit(1e-9));
  }
}

// ---- clamping ----------------------------------------------------------

TEST(Limits, ClampAndCheck) {
  Rig rig = planar_chain(2);
  rig.joints[0].lower = -0.5;
  rig.joints[0].upper = 0.5;
  PoseVector pose(2);
  pose << 2.0, -4.0;
  EXPECT_FALSE(within_limits(rig, pose));
  const PoseVector c = clamp_to_limits(rig, pose);
  EXPECT_EQ(c[0], 0.5);
  EXPECT_EQ(c[1], -pi);
  EXPECT_TRUE(within_limits(rig, c));
  EXPECT_FALSE(within_limits(rig, PoseVector::Zero(3)));
}

// ---- multi-DOF splitting and the hand ----------------------------------

TEST(SplitMultiDof, OneAxisUnchanged) {
  const MultiDofJointSpec spec{"knuckle", 0, {0.1, 0.2, 0.3}, {Axis::Y}, {-0.5}, {0.5}};
  const auto joints = split_multi_dof(spec, 4, 7);
  ASSERT_EQ(joints.size(), 1u);
  EXPECT_EQ(joints[0].id, 7);
  EXPECT_EQ(joints[0].parent, 4);
  EXPECT_EQ(joints[0].name, "knuckle");
  EXPECT_EQ(joints[0].offset, Vector3d(0.1, 0.2, 0.3));
  EXPECT_EQ(joints[0].axis, Axis::Y);
}

TEST(SplitMultiDof, ThreeAxes) {
  const MultiDofJointSpec spec{"ball", kRoot, {1, 2, 3}, {Axis::X, Axis::Y, Axis::Z}, {-1, -1, -1}, {1, 1, 1}};
  const auto joints = split_multi_dof(spec, kRoot, 0);
  ASSERT_EQ(joints.size(), 3u);
  EXPECT_EQ(joints[0].offset, Vector3d(1, 2, 3));
  EXPECT_EQ(joints[1].offset, Vector3d::Zero());
  EXPECT_EQ(joints[2].offset, Vector3d::Zero());
  EXPECT_EQ(joints[1].parent, 0);
  EXPECT_EQ(joints[2].parent, 1);
  EXPECT_EQ(joints[2].axis, Axis::Z);
}

TEST(SplitMultiDof, RejectsDuplicateAxesAndBadCounts) {
  EXPECT_THROW(split_multi_dof({"dup", kRoot, {}, {Axis::X, Axis::X}, {0, 0}, {1, 1}}, kRoot, 0),
               std::invalid_argument);
  EXPECT_THROW(split_multi_dof({"none", kRoot, {}, {}, {}, {}}, kRoot, 0), std::invalid_argument);
  EXPECT_THROW(split_multi_dof({"four", kRoot, {}, {Axis::X, Axis::Y, Axis::Z, Axis::X}, {0, 0, 0, 0}, {1, 1, 1, 1}},
                               kRoot, 0),
               std::invalid_argument);
}

TEST(SplitMultiDof, TwoDofEqualsQuaternionProduct) {
  const MultiDofJointSpec spec{"mcp", kRoot, {0.3, 0, 0}, {Axis::Y, Axis::Z}, {-pi, -pi}, {pi, pi}};
  Rig rig;
  rig.joints = split_multi_dof(spec, kRoot, 0);
  rig.end_effectors.push_back({1, {0.1, 0, 0}});
  Rng rng(37);
  for (int trial = 0; trial < 100; ++trial) {
    PoseVector pose(2);
    pose << uniform(rng, -pi, pi), uniform(rng, -pi, pi);
    const Quaterniond q = quat_about(Axis::Y, pose[0]) * quat_about(Axis::Z, pose[1]);
    const auto world = forward_kinematics(rig, pose);
    EXPECT_LE(max_abs_diff(world[1].real, q), 1e-15);
    EXPECT_LE((dq_translation(world[1]) - Vector3d(0.3, 0, 0)).norm(), 1e-15);
    EXPECT_LE((end_effector_poses(rig, world)[0].position - (Vector3d(0.3, 0, 0) + quat_rotate(q, Vector3d(0.1, 0, 0))))
                  .norm(),
              1e-15);
  }
}

TEST(HandModel, DegreesOfFreedomAndAnatomy) {
  const HandAnatomy anatomy = hand_anatomy();
  EXPECT_EQ(anatomy.joints.size(), 16u);
  EXPECT_EQ(anatomy.link_count(), 17);

  const Rig hand = build_hand_model();
  EXPECT_EQ(hand.dof(), 22);
  EXPECT_EQ(hand.effector_count(), 6);
  EXPECT_TRUE(rig_validate(hand).empty());
  for (const Joint& j : hand.joints) EXPECT_TRUE(j.lower <= 0.0 && 0.0 <= j.upper) << j.name;
}

TEST(HandModel, ZeroPoseIsFlatAndFinite) {
  const Rig hand = build_hand_model();
  const auto poses = end_effector_poses(hand, PoseVector::Zero(hand.dof()));
  EXPECT_EQ(poses[0].position, Vector3d::Zero());
  for (int e = 1; e < 6; ++e) {
    EXPECT_TRUE(poses[e].position.allFinite());
    EXPECT_GT(poses[e].position.x(), 0.05);
    EXPECT_NEAR(poses[e].position.z(), e == 1 ? -0.01 : 0.0, 1e-15);  // flat palm
  }
}

TEST(HandModel, MatchesMatrixPipeline) {
  const Rig hand = build_hand_model();
  Rng rng(38);
  for (int trial = 0; trial < 200; ++trial) {
    const PoseVector pose = random_pose(hand, rng);
    const auto oracle = matrix_fk(hand, pose);
    const auto poses = end_effector_poses(hand, pose);
    for (int e = 0; e < hand.effector_count(); ++e)
      EXPECT_LE((poses[e].position - matrix_effector_position(hand, oracle, e)).norm(), 1e-12);
  }
}
