#include <gtest/gtest.h>

#include "helpers.hpp"
#include "vecquad/model.hpp"

using namespace vecquad;
using vecquad::testing::Gen;

namespace {

RobotState posed(const JointVector& q)
{
  RobotState s;
  s.joint_angles = q;
  return s;
}

// baselink-frame position of a {CoG} point
Vec3 in_base(const FrameSet& f, const Vec3& p) { return p + f.cog_in_base; }

// foot center through a plain chain of homogeneous transforms
Vec3 chain_foot(const RobotDescription& d, int leg, const JointVector& q)
{
  using Eigen::AngleAxisd;
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  t.rotate(AngleAxisd(d.first_hip_angle - 0.5 * kPi * leg, Vec3::UnitZ()));
  t.translate(Vec3(d.torso_half_width, 0, 0));
  t.rotate(AngleAxisd(q(4 * leg), Vec3::UnitZ()));
  t.rotate(AngleAxisd(q(4 * leg + 1), Vec3::UnitY()));
  t.translate(Vec3(d.link_length, 0, 0));
  t.rotate(AngleAxisd(q(4 * leg + 2), Vec3::UnitZ()));
  t.rotate(AngleAxisd(q(4 * leg + 3), Vec3::UnitY()));
  t.translate(Vec3(d.link_length, 0, 0));
  return t.translation();
}

}  // namespace

TEST(Model, TotalMass)
{
  RobotDescription d;
  EXPECT_NEAR(d.total_mass(), 2.0 + 8 * 1.65, 1e-12);
  Gen g(3);
  for (int n = 0; n < 50; ++n) {
    const FrameSet f = forward_kinematics(d, posed(g.joints(1.2)));
    EXPECT_NEAR(f.total_mass, d.total_mass(), 1e-12);
  }
}

TEST(Model, HomePoseCogOnAxis)
{
  RobotDescription d;
  const FrameSet f = forward_kinematics(d, posed(JointVector::Zero()));
  EXPECT_NEAR(f.cog_in_base.x(), 0.0, 1e-12);
  EXPECT_NEAR(f.cog_in_base.y(), 0.0, 1e-12);
  EXPECT_NEAR(f.cog_in_base.z(), 0.0, 1e-12);
  Vec3 sum = Vec3::Zero();
  for (int s = 0; s < kNumSegments; ++s) sum += d.segment_mass(s) * f.segment_cog[s];
  EXPECT_LT(sum.norm(), 1e-12);
}

TEST(Model, FootMatchesTransformChain)
{
  RobotDescription d;
  Gen g(11);
  for (int n = 0; n < 500; ++n) {
    const JointVector q = g.joints(1.5);
    const FrameSet f = forward_kinematics(d, posed(q));
    for (int leg = 0; leg < kNumLegs; ++leg) {
      EXPECT_LT((in_base(f, f.foot_center[leg]) - chain_foot(d, leg, q)).norm(), 1e-12);
    }
  }
}

TEST(Model, PitchedLegKeepsFootAtHipHeight)
{
  // hip pitch -30 and knee pitch +60: the outer link comes back down by
  // exactly what the inner link rose
  RobotDescription d;
  JointVector q = JointVector::Zero();
  q(joint_index(0, JointRole::HipPitch)) = -30 * kDegToRad;
  q(joint_index(0, JointRole::KneePitch)) = 60 * kDegToRad;
  const FrameSet f = forward_kinematics(d, posed(q));
  const Vec3 knee = in_base(f, f.joint_origin[joint_index(0, JointRole::KneeYaw)]);
  EXPECT_NEAR(knee.z(), d.link_length * 0.5, 1e-12);
  EXPECT_NEAR(in_base(f, f.foot_center[0]).z(), 0.0, 1e-12);
}

TEST(Model, HalfTurnSymmetry)
{
  // legs k and k+2 with equal angles map onto each other under Rz(pi)
  RobotDescription d;
  Gen g(5);
  const Mat3 half = rot_z(kPi);
  for (int n = 0; n < 200; ++n) {
    JointVector q = g.joints(1.4);
    q.segment<8>(8) = q.segment<8>(0);
    const FrameSet f = forward_kinematics(d, posed(q));
    for (int leg = 0; leg < 2; ++leg) {
      EXPECT_LT((half * in_base(f, f.foot_center[leg]) - in_base(f, f.foot_center[leg + 2])).norm(), 1e-12);
      for (int k = 0; k < 2; ++k) {
        const int a = 2 * leg + k, b = a + 4;
        EXPECT_LT((half * in_base(f, f.rotor_position[a]) - in_base(f, f.rotor_position[b])).norm(), 1e-12);
        EXPECT_TRUE((half * f.link_rotation[a]).isApprox(f.link_rotation[b], 1e-12));
      }
    }
    // and the whole-body CoG stays on the yaw axis
    EXPECT_LT(f.cog_in_base.head<2>().norm(), 1e-12);
  }
}

TEST(Model, QuarterTurnOfHomePose)
{
  RobotDescription d;
  const FrameSet f = forward_kinematics(d, posed(JointVector::Zero()));
  for (int leg = 0; leg < kNumLegs; ++leg) {
    const Vec3 next = rot_z(-0.5 * kPi) * f.foot_center[leg];
    EXPECT_LT((next - f.foot_center[(leg + 1) % kNumLegs]).norm(), 1e-12);
  }
}

TEST(Model, JacobianStructure)
{
  RobotDescription d;
  Gen g(7);
  const FrameSet f = forward_kinematics(d, g.state(1.2));
  EXPECT_TRUE(jacobian(f, JacobianTarget::Segment, 0).isZero());
  for (int leg = 0; leg < kNumLegs; ++leg) {
    const PointJacobian j = jacobian(f, JacobianTarget::Contact, leg);
    const int yaw = joint_index(leg, JointRole::HipYaw);
    const Vec3 expected = f.joint_axis[yaw].cross(f.foot_center[leg] - f.joint_origin[yaw]);
    EXPECT_LT((j.col(yaw) - expected).norm(), 1e-14);
    for (int other = 0; other < kNumJoints; ++other) {
      if (other / 4 != leg) EXPECT_TRUE(j.col(other).isZero());
    }
    // inner rotor does not move with the knee
    const PointJacobian ji = jacobian(f, JacobianTarget::Rotor, inner_link(leg));
    EXPECT_TRUE(ji.col(joint_index(leg, JointRole::KneeYaw)).isZero());
    EXPECT_TRUE(ji.col(joint_index(leg, JointRole::KneePitch)).isZero());
  }
  EXPECT_THROW(jacobian(f, JacobianTarget::Contact, 4), std::out_of_range);
}

TEST(Model, JacobiansMatchFiniteDifferences)
{
  RobotDescription d;
  Gen g(13);
  const double h = 1e-6;
  for (int n = 0; n < 30; ++n) {
    RobotState s = g.state(1.2);
    const FrameSet f = forward_kinematics(d, s);
    for (int j = 0; j < kNumJoints; ++j) {
      RobotState sp = s, sm = s;
      sp.joint_angles(j) += h;
      sm.joint_angles(j) -= h;
      const FrameSet fp = forward_kinematics(d, sp), fm = forward_kinematics(d, sm);
      for (int leg = 0; leg < kNumLegs; ++leg) {
        const Vec3 fd = (in_base(fp, fp.contact_point[leg]) - in_base(fm, fm.contact_point[leg])) / (2 * h);
        EXPECT_LT((jacobian(f, JacobianTarget::Contact, leg).col(j) - fd).norm(), 1e-5);
      }
      for (int i = 0; i < kNumRotors; ++i) {
        const Vec3 fd = (in_base(fp, fp.rotor_position[i]) - in_base(fm, fm.rotor_position[i])) / (2 * h);
        EXPECT_LT((jacobian(f, JacobianTarget::Rotor, i).col(j) - fd).norm(), 1e-5);
      }
      for (int seg = 0; seg < kNumSegments; ++seg) {
        const Vec3 fd = (in_base(fp, fp.segment_cog[seg]) - in_base(fm, fm.segment_cog[seg])) / (2 * h);
        EXPECT_LT((jacobian(f, JacobianTarget::Segment, seg).col(j) - fd).norm(), 1e-5);
      }
      const Vec3 fd = (fp.cog_in_base - fm.cog_in_base) / (2 * h);
      EXPECT_LT((cog_jacobian(d, f).col(j) - fd).norm(), 1e-5);
    }
  }
}

TEST(Model, InertiaAgainstPointMasses)
{
  // rods as ten point masses each, modules and torso as given
  RobotDescription d;
  Gen g(17);
  for (int n = 0; n < 20; ++n) {
    const FrameSet f = forward_kinematics(d, posed(g.joints(1.4)));
    std::vector<std::pair<double, Vec3>> points;
    for (int i = 0; i < kNumLinks; ++i) {
      const auto& l = d.links[i];
      for (int k = 0; k < 10; ++k) {
        const Vec3 local((k + 0.5) * d.link_length / 10.0, 0, 0);
        points.emplace_back(l.rod_mass / 10.0, f.link_origin[i] + f.link_rotation[i] * local);
      }
      points.emplace_back(l.module_mass, f.link_origin[i] + f.link_rotation[i] * Vec3(d.rotor_position, 0, 0));
    }
    points.emplace_back(d.torso_mass, f.segment_cog[0]);
    Mat3 oracle = d.torso_inertia;
    for (const auto& [m, p] : points) oracle += m * (p.squaredNorm() * Mat3::Identity() - p * p.transpose());
    EXPECT_LT((f.inertia - oracle).norm() / oracle.norm(), 0.02);
    EXPECT_TRUE(f.inertia.isApprox(f.inertia.transpose(), 1e-14));
  }
}

TEST(Model, ParallelAxisTwoPointMasses)
{
  // massless rods, point modules at the link tips, negligible torso
  RobotDescription d;
  d.torso_mass = 1e-9;
  d.torso_inertia = Mat3::Identity() * 1e-12;
  d.link_radius = 1e-9;
  d.rotor_position = d.link_length;
  for (auto& l : d.links) l = LinkMass{1e-9, 1.0};
  // straight legs: link 2k at the knee, 2k+1 at the foot, all on the xy plane
  const FrameSet f = forward_kinematics(d, posed(JointVector::Zero()));
  double izz = 0.0;
  for (int leg = 0; leg < kNumLegs; ++leg) {
    izz += std::pow(d.torso_half_width + d.link_length, 2) + std::pow(d.torso_half_width + 2 * d.link_length, 2);
  }
  EXPECT_NEAR(f.inertia(2, 2), izz, 1e-6);
  EXPECT_NEAR(f.inertia(0, 0) + f.inertia(1, 1), izz, 1e-6);
}

TEST(Model, ContactPointLipschitz)
{
  // hip axes are at most 2L from the foot and knee axes at most L, so
  // |dp| <= sqrt(4L^2 + 4L^2 + L^2 + L^2) |dq| along any path
  RobotDescription d;
  Gen g(19);
  const double lip = std::sqrt(10.0) * d.link_length;
  for (int n = 0; n < 500; ++n) {
    const JointVector q1 = g.joints(1.4);
    const JointVector q2 = q1 + g.joints(0.1);
    const FrameSet a = forward_kinematics(d, posed(q1)), b = forward_kinematics(d, posed(q2));
    for (int leg = 0; leg < kNumLegs; ++leg) {
      const double dp = (in_base(a, a.contact_point[leg]) - in_base(b, b.contact_point[leg])).norm();
      EXPECT_LE(dp, lip * (q2 - q1).segment<4>(4 * leg).norm() + 1e-12) << "leg " << leg;
    }
  }
}

TEST(Model, JointLimitIsReported)
{
  RobotDescription d;
  JointVector q = JointVector::Zero();
  q(6) = 100 * kDegToRad;
  try {
    forward_kinematics(d, posed(q));
    FAIL() << "expected JointLimitError";
  } catch (const JointLimitError& e) {
    EXPECT_EQ(e.joint(), 6);
    EXPECT_NE(std::string(e.what()).find("front_right_knee_yaw"), std::string::npos);
  }
}

TEST(Model, DescriptionValidation)
{
  RobotDescription d;
  EXPECT_NO_THROW(d.validate());
  RobotDescription bad = d;
  bad.links[1].module_mass = 2.0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = d;
  bad.torso_mass = 0.0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = d;
  bad.rotor_position = 1.0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(Model, CogVelocityMatchesFiniteDifference)
{
  RobotDescription d;
  Gen g(23);
  const double h = 1e-6;
  for (int n = 0; n < 50; ++n) {
    RobotState s = g.state(1.2);
    s.base_linear_velocity = g.vec3(1.0);
    s.base_angular_velocity = g.vec3(1.0);
    s.joint_velocities = g.joints(0.5);
    const Vec3 v = cog_velocity(d, forward_kinematics(d, s), s);
    RobotState sp = s, sm = s;
    sp.base_position += h * s.base_linear_velocity;
    sm.base_position -= h * s.base_linear_velocity;
    sp.base_orientation = s.base_orientation * exp_so3(h * s.base_angular_velocity);
    sm.base_orientation = s.base_orientation * exp_so3(-h * s.base_angular_velocity);
    sp.joint_angles += h * s.joint_velocities;
    sm.joint_angles -= h * s.joint_velocities;
    const Vec3 fd = (forward_kinematics(d, sp).cog_position - forward_kinematics(d, sm).cog_position) / (2 * h);
    EXPECT_LT((v - fd).norm(), 1e-6);
  }
}
