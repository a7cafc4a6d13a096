#include "vecquad/model.hpp"

#include <cmath>
#include <sstream>

namespace vecquad {

namespace {

constexpr const char* kLegNames[kNumLegs] = {"front_left", "front_right", "rear_right", "rear_left"};
constexpr const char* kRoleNames[4] = {"hip_yaw", "hip_pitch", "knee_yaw", "knee_pitch"};
constexpr double kLimitTolerance = 1e-9;

std::string limit_message(int joint, double value)
{
  std::ostringstream os;
  os << "joint " << joint_name(joint) << " angle " << value * kRadToDeg << " deg outside its limits";
  return os.str();
}

Mat3 rod_inertia(double mass, double length, double radius)
{
  const double transverse = mass * (3.0 * radius * radius + length * length) / 12.0;
  return Eigen::Vector3d(0.5 * mass * radius * radius, transverse, transverse).asDiagonal();
}

Mat3 parallel_axis(double mass, const Vec3& d)
{
  return mass * (d.squaredNorm() * Mat3::Identity() - d * d.transpose());
}

}  // namespace

std::string joint_name(int joint)
{
  if (joint < 0 || joint >= kNumJoints) return "joint" + std::to_string(joint);
  return std::string(kLegNames[joint / 4]) + "_" + kRoleNames[joint % 4];
}

JointLimitError::JointLimitError(int joint, double value)
  : std::domain_error(limit_message(joint, value)), joint_(joint)
{
}

void RobotDescription::validate() const
{
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("robot description: ") + what);
  };
  require(torso_mass > 0.0, "torso mass must be positive");
  require(link_length > 0.0, "link length must be positive");
  require(link_radius > 0.0, "link radius must be positive");
  require(torso_half_width >= 0.0, "torso half width must be non-negative");
  require(max_thrust > 0.0, "max thrust must be positive");
  require(max_joint_torque > 0.0, "max joint torque must be positive");
  require(max_joint_speed > 0.0 && max_vectoring_speed > 0.0, "actuator speeds must be positive");
  require(foot_radius >= 0.0, "foot radius must be non-negative");
  require(vectoring_axis_offset >= 0.0, "vectoring axis offset must be non-negative");
  require(rotor_position >= 0.0 && rotor_position <= link_length, "rotor position must lie on the link");
  require(torso_inertia.isApprox(torso_inertia.transpose()), "torso inertia must be symmetric");
  require(Eigen::SelfAdjointEigenSolver<Mat3>(torso_inertia).eigenvalues().minCoeff() > 0.0,
          "torso inertia must be positive definite");
  for (const auto& l : links) {
    require(l.rod_mass > 0.0 && l.module_mass >= 0.0, "link masses must be positive");
  }
  for (const auto& j : joint_limits) {
    require(j.lower < j.upper, "joint lower limit must be below upper limit");
  }
  // legs k and k+2 must coincide under a half turn about the torso z axis
  for (int link = 0; link < kNumLinks / 2; ++link) {
    const auto& a = links[link];
    const auto& b = links[link + kNumLinks / 2];
    require(a.rod_mass == b.rod_mass && a.module_mass == b.module_mass,
            "link masses must be point symmetric (leg k and leg k+2)");
  }
  for (int j = 0; j < kNumJoints / 2; ++j) {
    const auto& a = joint_limits[j];
    const auto& b = joint_limits[j + kNumJoints / 2];
    require(a.lower == b.lower && a.upper == b.upper, "joint limits must be point symmetric");
  }
}

double RobotDescription::total_mass() const
{
  double m = torso_mass;
  for (int i = 0; i < kNumLinks; ++i) m += link_mass(i);
  return m;
}

Vec3 RobotDescription::hip_position(int leg) const
{
  const double a = hip_angle(leg);
  return Vec3(torso_half_width * std::cos(a), torso_half_width * std::sin(a), 0.0);
}

Vec3 RobotDescription::link_cog_local(int link) const
{
  const auto& l = links[link];
  const double x = (l.rod_mass * 0.5 * link_length + l.module_mass * rotor_position) / (l.rod_mass + l.module_mass);
  return Vec3(x, 0.0, 0.0);
}

Mat3 RobotDescription::link_inertia_local(int link) const
{
  const auto& l = links[link];
  const Vec3 cog = link_cog_local(link);
  Mat3 inertia = rod_inertia(l.rod_mass, link_length, link_radius);
  inertia += parallel_axis(l.rod_mass, Vec3(0.5 * link_length, 0.0, 0.0) - cog);
  inertia += parallel_axis(l.module_mass, Vec3(rotor_position, 0.0, 0.0) - cog);
  return inertia;
}

void RobotState::validate(const RobotDescription& desc) const
{
  const Mat3& r = base_orientation;
  if (std::abs(r.determinant() - 1.0) > 1e-9 || !(r.transpose() * r).isApprox(Mat3::Identity(), 1e-9)) {
    throw std::invalid_argument("robot state: base orientation is not a rotation");
  }
  for (int j = 0; j < kNumJoints; ++j) {
    const double q = joint_angles(j);
    const auto& lim = desc.joint_limits[j];
    if (!(q >= lim.lower - kLimitTolerance && q <= lim.upper + kLimitTolerance)) throw JointLimitError(j, q);
  }
  for (int i = 0; i < kNumRotors; ++i) {
    if (thrust(i) < 0.0 || thrust(i) > desc.max_thrust) {
      throw std::invalid_argument("robot state: thrust of rotor " + std::to_string(i) + " outside [0, max]");
    }
  }
}

Vec3 rotor_origin(const RobotDescription& desc, const Vec3& link_origin, const Mat3& link_rotation, double phi)
{
  const Vec3 local = Vec3(desc.rotor_position, 0.0, 0.0) + rot_x(phi) * Vec3(0.0, 0.0, desc.vectoring_axis_offset);
  return link_origin + link_rotation * local;
}

Mat3 rotor_orientation(const Mat3& link_rotation, double phi, double theta)
{
  return link_rotation * rot_x(phi) * rot_y(theta);
}

FrameSet forward_kinematics(const RobotDescription& desc, const RobotState& state)
{
  const JointVector& q = state.joint_angles;
  for (int j = 0; j < kNumJoints; ++j) {
    const auto& lim = desc.joint_limits[j];
    if (!(q(j) >= lim.lower - kLimitTolerance && q(j) <= lim.upper + kLimitTolerance)) throw JointLimitError(j, q(j));
  }

  FrameSet f;
  const Vec3 ex = Vec3::UnitX();

  // everything in the baselink frame first
  for (int leg = 0; leg < kNumLegs; ++leg) {
    const Vec3 hip = desc.hip_position(leg);
    Mat3 r = rot_z(desc.hip_angle(leg));

    const int j0 = joint_index(leg, JointRole::HipYaw);
    f.joint_origin[j0] = hip;
    f.joint_axis[j0] = r.col(2);
    r = r * rot_z(q(j0));
    f.joint_origin[j0 + 1] = hip;
    f.joint_axis[j0 + 1] = r.col(1);
    r = r * rot_y(q(j0 + 1));
    f.link_origin[inner_link(leg)] = hip;
    f.link_rotation[inner_link(leg)] = r;

    const Vec3 knee = hip + r * (desc.link_length * ex);
    f.joint_origin[j0 + 2] = knee;
    f.joint_axis[j0 + 2] = r.col(2);
    r = r * rot_z(q(j0 + 2));
    f.joint_origin[j0 + 3] = knee;
    f.joint_axis[j0 + 3] = r.col(1);
    r = r * rot_y(q(j0 + 3));
    f.link_origin[outer_link(leg)] = knee;
    f.link_rotation[outer_link(leg)] = r;

    f.foot_center[leg] = knee + r * (desc.link_length * ex);
  }

  double mass = desc.torso_mass;
  Vec3 moment = Vec3::Zero();
  f.segment_cog[0] = Vec3::Zero();
  for (int i = 0; i < kNumLinks; ++i) {
    f.segment_cog[i + 1] = f.link_origin[i] + f.link_rotation[i] * desc.link_cog_local(i);
    mass += desc.link_mass(i);
    moment += desc.link_mass(i) * f.segment_cog[i + 1];
  }
  const Vec3 cog = moment / mass;

  // shift to {CoG}
  f.cog_in_base = cog;
  f.total_mass = mass;
  f.cog_orientation = state.base_orientation;
  f.cog_position = state.base_position + state.base_orientation * cog;
  for (auto& p : f.segment_cog) p -= cog;
  for (auto& p : f.joint_origin) p -= cog;
  for (auto& p : f.link_origin) p -= cog;
  for (auto& p : f.foot_center) p -= cog;

  const Vec3 down_in_cog = state.base_orientation.transpose() * Vec3(0.0, 0.0, -desc.foot_radius);
  for (int leg = 0; leg < kNumLegs; ++leg) f.contact_point[leg] = f.foot_center[leg] + down_in_cog;

  for (int i = 0; i < kNumRotors; ++i) {
    f.rotor_position[i] = rotor_origin(desc, f.link_origin[i], f.link_rotation[i], state.phi(i));
    f.rotor_rotation[i] = rotor_orientation(f.link_rotation[i], state.phi(i), state.theta(i));
  }

  f.inertia = total_inertia(desc, f);
  return f;
}

PointJacobian point_jacobian(const FrameSet& frames, int link, const Vec3& point)
{
  PointJacobian jac = PointJacobian::Zero();
  if (link < 0) return jac;
  const int leg = leg_of_link(link);
  // inner link depends on the two hip joints, outer link on all four
  const int upstream = (link == inner_link(leg)) ? 2 : 4;
  for (int k = 0; k < upstream; ++k) {
    const int j = 4 * leg + k;
    jac.col(j) = frames.joint_axis[j].cross(point - frames.joint_origin[j]);
  }
  return jac;
}

PointJacobian jacobian(const FrameSet& frames, JacobianTarget target, int index)
{
  switch (target) {
    case JacobianTarget::Contact:
      if (index < 0 || index >= kNumLegs) break;
      // the contact point sits a fixed world-vertical distance below the foot
      // sphere center, so both move identically under joint motion
      return point_jacobian(frames, outer_link(index), frames.foot_center[index]);
    case JacobianTarget::Rotor:
      if (index < 0 || index >= kNumRotors) break;
      return point_jacobian(frames, index, frames.rotor_position[index]);
    case JacobianTarget::Segment:
      if (index < 0 || index >= kNumSegments) break;
      return point_jacobian(frames, index - 1, frames.segment_cog[index]);
  }
  throw std::out_of_range("jacobian: target index " + std::to_string(index) + " does not exist");
}

PointJacobian cog_jacobian(const RobotDescription& desc, const FrameSet& frames)
{
  PointJacobian jac = PointJacobian::Zero();
  for (int s = 1; s < kNumSegments; ++s) {
    jac += desc.segment_mass(s) * jacobian(frames, JacobianTarget::Segment, s);
  }
  return jac / frames.total_mass;
}

Mat3 total_inertia(const RobotDescription& desc, const FrameSet& frames)
{
  Mat3 inertia = desc.torso_inertia + parallel_axis(desc.torso_mass, frames.segment_cog[0]);
  for (int i = 0; i < kNumLinks; ++i) {
    const Mat3& r = frames.link_rotation[i];
    inertia += r * desc.link_inertia_local(i) * r.transpose();
    inertia += parallel_axis(desc.link_mass(i), frames.segment_cog[i + 1]);
  }
  return 0.5 * (inertia + inertia.transpose());
}

Vec3 cog_velocity(const RobotDescription& desc, const FrameSet& frames, const RobotState& state)
{
  const Vec3 shape_rate = cog_jacobian(desc, frames) * state.joint_velocities;
  return state.base_linear_velocity +
         state.base_orientation * (state.base_angular_velocity.cross(frames.cog_in_base) + shape_rate);
}

}  // namespace vecquad
