#pragma once

#include <array>
#include <bitset>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "vecquad/math.hpp"

namespace vecquad {

constexpr int kNumLegs = 4;
constexpr int kNumLinks = 8;
constexpr int kNumRotors = 8;
constexpr int kNumJoints = 16;
// torso plus one segment per link
constexpr int kNumSegments = 1 + kNumLinks;

using JointVector = Eigen::Matrix<double, kNumJoints, 1>;
using RotorVector = Eigen::Matrix<double, kNumRotors, 1>;
using ContactSet = std::bitset<kNumLegs>;

// Leg order is front-left, front-right, rear-right, rear-left; each leg owns
// joints 4k..4k+3 = (hip yaw, hip pitch, knee yaw, knee pitch) and links
// 2k (inner) and 2k+1 (outer). Rotor i is mounted on link i.
enum class JointRole { HipYaw = 0, HipPitch = 1, KneeYaw = 2, KneePitch = 3 };

constexpr int joint_index(int leg, JointRole role) { return 4 * leg + static_cast<int>(role); }
constexpr int inner_link(int leg) { return 2 * leg; }
constexpr int outer_link(int leg) { return 2 * leg + 1; }
constexpr int leg_of_link(int link) { return link / 2; }

std::string joint_name(int joint);

class JointLimitError : public std::domain_error
{
public:
  JointLimitError(int joint, double value);
  int joint() const { return joint_; }

private:
  int joint_;
};

struct JointLimit
{
  double lower = -0.5 * kPi;
  double upper = 0.5 * kPi;
};

// Mass model of one link: a uniform rod along the link x axis plus the rotor
// module lumped as a point mass at the rotor position.
struct LinkMass
{
  double rod_mass = 0.45;
  double module_mass = 1.2;
};

struct RobotDescription
{
  double torso_half_width = 0.27;
  double link_length = 0.54;
  double link_radius = 0.015;
  double torso_mass = 2.0;
  Mat3 torso_inertia = Eigen::Vector3d(0.05, 0.05, 0.097).asDiagonal();
  std::array<LinkMass, kNumLinks> links{};

  // position of the vectoring roll axis along the link, and the offset from
  // that axis to the pitch axis (rotor frame origin) along the roll-frame z
  double rotor_position = 0.27;
  double vectoring_axis_offset = 0.005;

  double foot_radius = 0.03;
  // heading of leg 0's hip relative to the torso x axis; leg k sits at
  // first_hip_angle - k * 90 deg
  double first_hip_angle = 0.25 * kPi;

  std::array<JointLimit, kNumJoints> joint_limits{};

  double max_thrust = 42.0;
  double max_joint_torque = 6.5;
  double max_joint_speed = 0.34;
  double max_vectoring_speed = 4.2;

  // throws std::invalid_argument when an invariant is broken
  void validate() const;

  double total_mass() const;
  double link_mass(int link) const { return links[link].rod_mass + links[link].module_mass; }
  double segment_mass(int segment) const { return segment == 0 ? torso_mass : link_mass(segment - 1); }

  double hip_angle(int leg) const { return first_hip_angle - 0.5 * kPi * leg; }
  Vec3 hip_position(int leg) const;

  // segment CoG and rotational inertia about that CoG, in the link frame
  Vec3 link_cog_local(int link) const;
  Mat3 link_inertia_local(int link) const;
};

struct RobotState
{
  Vec3 base_position = Vec3::Zero();
  Mat3 base_orientation = Mat3::Identity();
  Vec3 base_linear_velocity = Vec3::Zero();
  // body frame
  Vec3 base_angular_velocity = Vec3::Zero();
  JointVector joint_angles = JointVector::Zero();
  JointVector joint_velocities = JointVector::Zero();
  RotorVector phi = RotorVector::Zero();
  RotorVector theta = RotorVector::Zero();
  RotorVector thrust = RotorVector::Zero();
  ContactSet contacts{};

  void validate(const RobotDescription& desc) const;
};

// Every position is expressed in the CoG frame {CoG}: origin at the
// whole-body CoG, axes parallel to the baselink.
struct FrameSet
{
  Vec3 cog_in_base = Vec3::Zero();
  Vec3 cog_position = Vec3::Zero();      // r_c in {W}
  Mat3 cog_orientation = Mat3::Identity();  // R_c = R_b
  double total_mass = 0.0;
  Mat3 inertia = Mat3::Zero();            // I_Sigma about the CoG

  std::array<Vec3, kNumLinks> link_origin{};
  std::array<Mat3, kNumLinks> link_rotation{};
  std::array<Vec3, kNumRotors> rotor_position{};
  std::array<Mat3, kNumRotors> rotor_rotation{};
  std::array<Vec3, kNumLegs> foot_center{};
  std::array<Vec3, kNumLegs> contact_point{};
  std::array<Vec3, kNumSegments> segment_cog{};
  std::array<Vec3, kNumJoints> joint_origin{};
  std::array<Vec3, kNumJoints> joint_axis{};

  Vec3 to_world(const Vec3& p_cog) const { return cog_position + cog_orientation * p_cog; }
  Vec3 base_position() const { return cog_position - cog_orientation * cog_in_base; }
};

FrameSet forward_kinematics(const RobotDescription& desc, const RobotState& state);

// rotor frame origin and orientation for a given link frame and vectoring angles
Vec3 rotor_origin(const RobotDescription& desc, const Vec3& link_origin, const Mat3& link_rotation, double phi);
Mat3 rotor_orientation(const Mat3& link_rotation, double phi, double theta);

enum class JacobianTarget { Contact, Rotor, Segment };

using PointJacobian = Eigen::Matrix<double, 3, kNumJoints>;

// Geometric Jacobian of a point rigidly attached to `link` (-1 for the torso):
// maps joint velocities to the point velocity relative to the baselink,
// expressed in the {CoG} axes.
PointJacobian point_jacobian(const FrameSet& frames, int link, const Vec3& point);
PointJacobian jacobian(const FrameSet& frames, JacobianTarget target, int index);

// CoG velocity w.r.t. the baselink caused by joint motion, in {CoG} axes
PointJacobian cog_jacobian(const RobotDescription& desc, const FrameSet& frames);

Mat3 total_inertia(const RobotDescription& desc, const FrameSet& frames);

// world-frame velocity of the CoG given baselink twist and joint rates
Vec3 cog_velocity(const RobotDescription& desc, const FrameSet& frames, const RobotState& state);

}  // namespace vecquad
