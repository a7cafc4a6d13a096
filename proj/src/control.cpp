#include "vecquad/control.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vecquad {

void ControlGains::validate() const
{
  for (const Vec3* v : {&force_p, &force_i, &force_d, &torque_p, &torque_i, &torque_d}) {
    if ((v->array() < 0.0).any()) throw std::invalid_argument("control gains must be non-negative");
  }
  if (joint_p < 0.0 || joint_d < 0.0 || altitude_p < 0.0) throw std::invalid_argument("control gains must be non-negative");
  if (torque_integral_limit < 0.0) throw std::invalid_argument("torque integral limit must be non-negative");
}

double PositionController::integral_limit(int axis, double mass) const
{
  const double limit = gains_.force_integral_limit < 0.0 ? mass * kGravity : gains_.force_integral_limit;
  const double k = mass * gains_.force_i(axis);
  return k > 0.0 ? limit / k : 0.0;
}

Vec3 PositionController::update(const Vec3& target, const Vec3& target_velocity, const Vec3& position,
                                const Vec3& velocity, const Mat3& orientation, double mass,
                                const Vec3& contact_force_sum, double dt)
{
  const Vec3 e = target - position;
  const Vec3 e_dot = target_velocity - velocity;
  integral_ += e * dt;
  for (int a = 0; a < 3; ++a) {
    const double lim = integral_limit(a, mass);
    integral_(a) = std::clamp(integral_(a), -lim, lim);
  }
  const Vec3 acc = gains_.force_p.cwiseProduct(e) + gains_.force_i.cwiseProduct(integral_) +
                   gains_.force_d.cwiseProduct(e_dot);
  const Vec3 support = Vec3(0.0, 0.0, mass * kGravity) - contact_force_sum;
  return orientation.transpose() * (mass * acc + support);
}

Vec3 attitude_error(const Mat3& r, const Mat3& r_target)
{
  return 0.5 * vee(r.transpose() * r_target - r_target.transpose() * r);
}

Vec3 omega_error(const Mat3& r, const Mat3& r_target, const Vec3& omega, const Vec3& omega_target)
{
  return r.transpose() * r_target * omega_target - omega;
}

Vec3 AttitudeController::update(const Mat3& orientation, const Mat3& target, const Vec3& omega,
                                const Vec3& omega_target, const Mat3& inertia, const Vec3& contact_torque,
                                double dt)
{
  const Vec3 e_r = attitude_error(orientation, target);
  const Vec3 e_w = omega_error(orientation, target, omega, omega_target);
  integral_ += e_r * dt;
  for (int a = 0; a < 3; ++a) {
    const double k = gains_.torque_i(a) * inertia(a, a);
    const double lim = k > 0.0 ? gains_.torque_integral_limit / k : 0.0;
    integral_(a) = std::clamp(integral_(a), -lim, lim);
  }
  const Vec3 acc = gains_.torque_p.cwiseProduct(e_r) + gains_.torque_i.cwiseProduct(integral_) +
                   gains_.torque_d.cwiseProduct(e_w);
  return inertia * acc + omega.cross(inertia * omega) - contact_torque;
}

Vec3 contact_torque(const FrameSet& frames, const std::array<Vec3, kNumLegs>& forces, const ContactSet& contacts)
{
  Vec3 t = Vec3::Zero();
  for (int leg = 0; leg < kNumLegs; ++leg) {
    if (!contacts.test(leg)) continue;
    t += frames.contact_point[leg].cross(frames.cog_orientation.transpose() * forces[leg]);
  }
  return t;
}

double joint_pd(double target, double angle, double rate, double kp, double kd, double limit)
{
  return std::clamp(kp * (target - angle) - kd * rate, -limit, limit);
}

const JointVector& JointShaper::step(const JointVector& target, double dt)
{
  for (int j = 0; j < kNumJoints; ++j) {
    const double e = target(j) - command_(j);
    const double v = rate_(j);
    // fastest speed that still allows stopping on the target
    const double stop = std::copysign(std::sqrt(2.0 * max_accel_ * std::abs(e)), e);
    const double want = std::clamp(stop, -max_speed_, max_speed_);
    const double dv = std::clamp(want - v, -max_accel_ * dt, max_accel_ * dt);
    double next = v + dv;
    double q = command_(j) + 0.5 * (v + next) * dt;
    // land exactly instead of chattering around the target
    if ((target(j) - q) * e <= 0.0 || std::abs(e) < 0.5 * max_accel_ * dt * dt) {
      q = target(j);
      next = 0.0;
    }
    command_(j) = q;
    rate_(j) = next;
  }
  return command_;
}

}  // namespace vecquad
