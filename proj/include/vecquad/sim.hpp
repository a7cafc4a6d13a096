#pragma once

#include <cstdint>
#include <stdexcept>

#include "vecquad/control.hpp"
#include "vecquad/thrust.hpp"

namespace vecquad {

struct SimConfig
{
  double timestep = 1e-3;
  double gravity = kGravity;
  double ground_height = 0.0;
  double ground_stiffness = 40000.0;
  double ground_damping = 500.0;
  double tangential_damping = 1000.0;
  double friction = 0.6;
  double thrust_time_constant = 0.05;
  double servo_time_constant = 0.03;
  double joint_time_constant = 0.03;
  // measurement errors seen by the controller; all zero means ideal sensing
  double position_noise = 0.0;
  double attitude_noise = 0.0;
  double joint_noise = 0.0;
  double joint_bias = 0.0;  // max magnitude of a constant per-joint encoder offset
  std::uint64_t seed = 1;

  void validate() const;
};

class SimDivergence : public std::runtime_error
{
public:
  SimDivergence(double time, const std::string& what);
  double time() const { return time_; }

private:
  double time_;
};

// world-frame penalty forces at each foot; foot_velocity is the world velocity
// of each contact point
std::array<Vec3, kNumLegs> contact_forces(const FrameSet& frames, const std::array<Vec3, kNumLegs>& foot_velocity,
                                          const SimConfig& cfg);

struct Actuation
{
  RotorCommands rotors{};
  JointVector joint_targets = JointVector::Zero();
  // test hook: extra force in {W} and torque in {CoG} applied at the CoG
  Vec3 external_force = Vec3::Zero();
  Vec3 external_torque = Vec3::Zero();
};

class Simulator
{
public:
  Simulator(const RobotDescription& desc, const SimConfig& cfg, const RobotState& initial);

  void step(const Actuation& act);

  const RobotState& state() const { return state_; }
  const FrameSet& frames() const { return frames_; }
  double time() const { return time_; }
  const Vec3& cog_position() const { return cog_position_; }
  const Vec3& cog_velocity() const { return cog_velocity_; }
  const std::array<Vec3, kNumLegs>& foot_forces() const { return foot_forces_; }
  // world-frame force of each rotor at the last step
  const std::array<Vec3, kNumRotors>& rotor_forces() const { return rotor_forces_; }

  // joint torques that hold the current pose against the actual rotor,
  // contact and gravity forces
  JointVector static_joint_torques() const;
  double mechanical_energy() const;
  int contact_count() const;

  // overrides the rigid-body velocities, e.g. for initial conditions in tests
  void set_cog_velocity(const Vec3& v, const Vec3& omega_body);

private:
  void refresh();

  RobotDescription desc_;
  SimConfig cfg_;
  RobotState state_;
  FrameSet frames_;
  double time_ = 0.0;
  Vec3 cog_position_;
  Vec3 cog_velocity_ = Vec3::Zero();
  std::array<Vec3, kNumLegs> foot_forces_ = zero_vectors<kNumLegs>();
  std::array<Vec3, kNumLegs> prev_contact_ = zero_vectors<kNumLegs>();
  std::array<Vec3, kNumRotors> rotor_forces_ = zero_vectors<kNumRotors>();
  bool have_prev_ = false;
};

}  // namespace vecquad
