#pragma once

#include "vecquad/model.hpp"

namespace vecquad {

constexpr double kGravity = 9.8;

struct WrenchCommand
{
  Vec3 force = Vec3::Zero();   // {CoG}
  Vec3 torque = Vec3::Zero();  // {CoG}

  Vec6 stacked() const
  {
    Vec6 w;
    w << force, torque;
    return w;
  }
  bool finite() const { return force.allFinite() && torque.allFinite(); }
};

struct ControlGains
{
  Vec3 force_p{3.6, 3.6, 2.8};
  Vec3 force_i{0.03, 0.03, 1.2};
  Vec3 force_d{4.0, 4.0, 2.8};
  Vec3 torque_p{15.0, 15.0, 10.0};
  Vec3 torque_i{0.3, 0.3, 0.1};
  Vec3 torque_d{5.0, 5.0, 5.0};
  double joint_p = 8.0;
  double joint_d = 0.5;
  double altitude_p = 25.0;
  // bound on the integral contribution per axis, in N and Nm; a negative
  // force limit means m * g
  double force_integral_limit = -1.0;
  double torque_integral_limit = 5.0;

  void validate() const;
};

class PositionController
{
public:
  explicit PositionController(const ControlGains& gains) : gains_(gains) {}

  // contact_force_sum is the world-frame sum of the planned contact forces
  Vec3 update(const Vec3& target, const Vec3& target_velocity, const Vec3& position, const Vec3& velocity,
              const Mat3& orientation, double mass, const Vec3& contact_force_sum, double dt);

  void reset() { integral_.setZero(); }
  const Vec3& integral() const { return integral_; }
  double integral_limit(int axis, double mass) const;

private:
  ControlGains gains_;
  Vec3 integral_ = Vec3::Zero();
};

Vec3 attitude_error(const Mat3& r, const Mat3& r_target);
Vec3 omega_error(const Mat3& r, const Mat3& r_target, const Vec3& omega, const Vec3& omega_target);

class AttitudeController
{
public:
  explicit AttitudeController(const ControlGains& gains) : gains_(gains) {}

  // contact_torque is sum p_c x R^T f_c in {CoG}; omega is body-frame
  Vec3 update(const Mat3& orientation, const Mat3& target, const Vec3& omega, const Vec3& omega_target,
              const Mat3& inertia, const Vec3& contact_torque, double dt);

  void reset() { integral_.setZero(); }
  const Vec3& integral() const { return integral_; }

private:
  ControlGains gains_;
  Vec3 integral_ = Vec3::Zero();
};

// sum over standing feet of p_c x R^T f_c
Vec3 contact_torque(const FrameSet& frames, const std::array<Vec3, kNumLegs>& forces, const ContactSet& contacts);

double joint_pd(double target, double angle, double rate, double kp, double kd, double limit);

// Turns joint target steps into speed and acceleration limited setpoints so
// the servos never see a jump. Each joint comes to rest exactly on its target.
class JointShaper
{
public:
  JointShaper(double max_speed, double max_accel) : max_speed_(max_speed), max_accel_(max_accel) {}

  void reset(const JointVector& q)
  {
    command_ = q;
    rate_.setZero();
  }
  const JointVector& step(const JointVector& target, double dt);
  const JointVector& command() const { return command_; }
  const JointVector& rate() const { return rate_; }

private:
  double max_speed_;
  double max_accel_;
  JointVector command_ = JointVector::Zero();
  JointVector rate_ = JointVector::Zero();
};

}  // namespace vecquad
