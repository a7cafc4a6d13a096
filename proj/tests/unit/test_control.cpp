#include <gtest/gtest.h>

#include "helpers.hpp"
#include "vecquad/control.hpp"

using namespace vecquad;
using vecquad::testing::Gen;

TEST(Control, HoverFeedForward)
{
  ControlGains gains;
  PositionController pc(gains);
  const double m = 15.2;
  const Vec3 f = pc.update(Vec3(0, 0, 1), Vec3::Zero(), Vec3(0, 0, 1), Vec3::Zero(), Mat3::Identity(), m,
                           Vec3::Zero(), 0.01);
  EXPECT_NEAR(f.z(), 148.96, 1e-9);
  EXPECT_NEAR(f.head<2>().norm(), 0.0, 1e-12);
}

TEST(Control, FeetCarryingWeightCancelFeedForward)
{
  ControlGains gains;
  PositionController pc(gains);
  const double m = 15.2;
  const Vec3 feet(0, 0, m * kGravity);
  const Vec3 f = pc.update(Vec3(0, 0, 1), Vec3::Zero(), Vec3(0, 0, 1), Vec3::Zero(), Mat3::Identity(), m, feet, 0.01);
  EXPECT_LT(f.norm(), 1e-12);
}

TEST(Control, ForceIsExpressedInBodyFrame)
{
  ControlGains gains;
  PositionController pc(gains);
  const Mat3 r = rot_x(0.3);
  const Vec3 f = pc.update(Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), r, 1.0, Vec3::Zero(), 0.01);
  EXPECT_LT((r * f - Vec3(0, 0, kGravity)).norm(), 1e-12);
}

TEST(Control, PositionYawEquivariance)
{
  // rotating the whole problem about world z leaves the body-frame command unchanged
  ControlGains gains;
  Gen g(21);
  for (int n = 0; n < 200; ++n) {
    PositionController a(gains), b(gains);
    const Mat3 yaw = rot_z(g.uniform(-kPi, kPi));
    const Vec3 target = g.vec3(1.0), pos = g.vec3(1.0), vel = g.vec3(0.5), tvel = g.vec3(0.5);
    const Mat3 r = g.rotation();
    const Vec3 feet(0, 0, g.uniform(0.0, 100.0));
    for (int k = 0; k < 3; ++k) {
      const Vec3 fa = a.update(target, tvel, pos, vel, r, 15.2, feet, 0.01);
      const Vec3 fb = b.update(yaw * target, yaw * tvel, yaw * pos, yaw * vel, yaw * r, 15.2, feet, 0.01);
      EXPECT_LT((fa - fb).norm(), 1e-9);
    }
  }
}

TEST(Control, PositionIntegralIsBounded)
{
  ControlGains gains;
  PositionController pc(gains);
  const double m = 15.2;
  for (int k = 0; k < 100000; ++k) {
    pc.update(Vec3(50, -50, 50), Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Mat3::Identity(), m, Vec3::Zero(), 0.01);
  }
  for (int a = 0; a < 3; ++a) {
    EXPECT_NEAR(std::abs(pc.integral()(a)), pc.integral_limit(a, m), 1e-12);
    // integral share of the force never exceeds m g
    EXPECT_LE(m * gains.force_i(a) * std::abs(pc.integral()(a)), m * kGravity + 1e-9);
  }
  // and unwinds as soon as the error flips
  const double before = pc.integral().x();
  pc.update(Vec3(-1, 0, 0), Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Mat3::Identity(), m, Vec3::Zero(), 0.01);
  EXPECT_LT(pc.integral().x(), before);
}

TEST(Control, AttitudeErrorClosedForm)
{
  EXPECT_LT((attitude_error(Mat3::Identity(), rot_z(0.5 * kPi)) - Vec3(0, 0, 1)).norm(), 1e-15);
  Gen g(22);
  for (int n = 0; n < 1000; ++n) {
    const Mat3 r = g.rotation();
    EXPECT_LT(attitude_error(r, r).norm(), 1e-14);
    const Vec3 axis = g.vec3(1.0).normalized();
    const double alpha = g.uniform(-3.0, 3.0);
    const Mat3 rd = r * Eigen::AngleAxisd(alpha, axis).toRotationMatrix();
    EXPECT_LT((attitude_error(r, rd) - std::sin(alpha) * axis).norm(), 1e-12);
    EXPECT_LT((attitude_error(r, rd) + attitude_error(rd, r)).norm(), 1e-12);
  }
}

TEST(Control, OmegaError)
{
  const Mat3 r = rot_x(0.2), rd = rot_y(-0.4);
  const Vec3 w(0.1, -0.2, 0.3), wd(-0.3, 0.2, 0.5);
  EXPECT_LT((omega_error(r, rd, w, wd) - (r.transpose() * rd * wd - w)).norm(), 1e-15);
  EXPECT_LT(omega_error(r, r, w, w).norm(), 1e-15);
}

TEST(Control, GyroscopicFeedForward)
{
  ControlGains gains;
  AttitudeController ac(gains);
  const Mat3 inertia = Eigen::Vector3d(1, 2, 3).asDiagonal();
  const Vec3 w(1, 1, 0);
  const Vec3 tau = ac.update(Mat3::Identity(), Mat3::Identity(), w, w, inertia, Vec3::Zero(), 0.01);
  EXPECT_LT((tau - Vec3(0, 0, 1)).norm(), 1e-12);
}

TEST(Control, AttitudeSubtractsContactTorque)
{
  ControlGains gains;
  AttitudeController a(gains), b(gains);
  const Mat3 inertia = Eigen::Vector3d(1, 2, 3).asDiagonal();
  const Vec3 ct(0.5, -1.0, 2.0);
  const Vec3 t0 = a.update(rot_x(0.1), Mat3::Identity(), Vec3::Zero(), Vec3::Zero(), inertia, Vec3::Zero(), 0.01);
  const Vec3 t1 = b.update(rot_x(0.1), Mat3::Identity(), Vec3::Zero(), Vec3::Zero(), inertia, ct, 0.01);
  EXPECT_LT((t0 - t1 - ct).norm(), 1e-12);
}

TEST(Control, AttitudeIntegralIsBounded)
{
  ControlGains gains;
  AttitudeController ac(gains);
  const Mat3 inertia = Eigen::Vector3d(1, 2, 3).asDiagonal();
  for (int k = 0; k < 100000; ++k) {
    ac.update(Mat3::Identity(), rot_x(1.0) * rot_y(1.0), Vec3::Zero(), Vec3::Zero(), inertia, Vec3::Zero(), 0.01);
  }
  for (int a = 0; a < 3; ++a) {
    EXPECT_LE(gains.torque_i(a) * inertia(a, a) * std::abs(ac.integral()(a)), gains.torque_integral_limit + 1e-9);
  }
}

TEST(Control, ContactTorqueExample)
{
  // a foot 1 m along x pushing straight up with 20 N gives -20 Nm about y
  RobotDescription d;
  FrameSet f = forward_kinematics(d, RobotState{});
  for (auto& p : f.contact_point) p = Vec3::Zero();
  f.contact_point[0] = Vec3(1, 0, 0);
  std::array<Vec3, kNumLegs> forces = zero_vectors<kNumLegs>();
  forces[0] = Vec3(0, 0, 20);
  forces[1] = Vec3(0, 0, 99);
  ContactSet c;
  c.set(0);
  EXPECT_LT((contact_torque(f, forces, c) - Vec3(0, -20, 0)).norm(), 1e-12);
  // with the foot on the y axis
  f.contact_point[0] = Vec3(0, -1, 0);
  forces[0] = Vec3(0, 0, 20);
  EXPECT_LT((contact_torque(f, forces, c) - Vec3(-20, 0, 0)).norm(), 1e-12);
  forces[0] = Vec3(20, 0, 0);
  EXPECT_LT((contact_torque(f, forces, c) - Vec3(0, 0, 20)).norm(), 1e-12);
}

TEST(Control, JointPd)
{
  EXPECT_NEAR(joint_pd(0.3, 0.05, 0.0, 8.0, 0.5, 6.5), 2.0, 1e-12);
  EXPECT_NEAR(joint_pd(0.0, 0.0, 1.0, 8.0, 0.5, 6.5), -0.5, 1e-12);
  EXPECT_NEAR(joint_pd(10.0, 0.0, 0.0, 8.0, 0.5, 6.5), 6.5, 1e-12);
  EXPECT_NEAR(joint_pd(-10.0, 0.0, 0.0, 8.0, 0.5, 6.5), -6.5, 1e-12);
}

TEST(Control, GainsValidation)
{
  ControlGains g;
  EXPECT_NO_THROW(g.validate());
  g.force_p.x() = -1.0;
  EXPECT_THROW(g.validate(), std::invalid_argument);
}

TEST(Control, ShaperRespectsLimitsAndLands)
{
  Gen g(24);
  const double vmax = 0.34, amax = 1.0, dt = 0.01;
  for (int n = 0; n < 50; ++n) {
    JointShaper s(vmax, amax);
    const JointVector start = g.joints(1.0);
    s.reset(start);
    const JointVector target = g.joints(1.0);
    JointVector prev_q = start, prev_v = JointVector::Zero();
    int k = 0;
    for (; k < 2000 && s.command() != target; ++k) {
      s.step(target, dt);
      const JointVector v = (s.command() - prev_q) / dt;
      EXPECT_LE(s.rate().cwiseAbs().maxCoeff(), vmax + 1e-12);
      EXPECT_LE(v.cwiseAbs().maxCoeff(), vmax + 1e-9);
      for (int j = 0; j < kNumJoints; ++j) {
        // the landing step zeroes the rate, every other step is acceleration limited
        if (s.command()(j) != target(j)) EXPECT_LE(std::abs(s.rate()(j) - prev_v(j)), amax * dt + 1e-12);
        // never passes the target
        EXPECT_GE((target(j) - s.command()(j)) * (target(j) - start(j)), -1e-15);
      }
      prev_q = s.command();
      prev_v = s.rate();
    }
    EXPECT_EQ(s.command(), target);
    // a 2 rad move at 0.34 rad/s takes about 6 s plus the ramps
    EXPECT_LT(k, 1000);
  }
}

TEST(Control, ShaperHoldsAtTarget)
{
  JointShaper s(0.34, 1.0);
  const JointVector q = JointVector::Constant(0.2);
  s.reset(q);
  for (int k = 0; k < 10; ++k) EXPECT_EQ(s.step(q, 0.01), q);
  EXPECT_TRUE(s.rate().isZero());
}
