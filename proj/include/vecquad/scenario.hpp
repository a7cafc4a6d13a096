#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "vecquad/allocation.hpp"
#include "vecquad/gait.hpp"
#include "vecquad/sim.hpp"

namespace vecquad {

enum class ScenarioKind { Hover, Transform, LegLift, Walk, Hybrid };

std::string to_string(ScenarioKind k);
ScenarioKind scenario_from_string(const std::string& name);

struct LegPose
{
  double hip_pitch = -16.0 * kDegToRad;
  double knee_pitch = 76.0 * kDegToRad;
};

struct ModeSettings
{
  AllocationWeights weights;
  double max_joint_torque = 6.5;
};

struct ScenarioConfig
{
  ScenarioKind kind = ScenarioKind::Hover;
  double duration = 0.0;  // <= 0 selects the scenario default
  double control_rate = 100.0;

  RobotDescription robot;
  ControlGains gains;
  SimConfig sim;
  GaitConfig gait;

  ModeSettings aerial{{1.0, 0.0, 1e-6}, 6.5};
  ModeSettings terrestrial{{1.0, 1.0, 1e-6}, 1.5};
  double box_half_width = -1.0;
  double planning_friction = 0.0;
  RefineOptions refine;
  bool refine_enabled = true;

  LegPose standing{-16.0 * kDegToRad, 76.0 * kDegToRad};
  LegPose extended{0.0, 20.0 * kDegToRad};

  double hover_height = 1.0;
  // hover starts displaced from its target by these amounts
  Vec3 hover_initial_offset{0.02, -0.02, -0.02};
  Vec3 hover_initial_rpy{2.0 * kDegToRad, -2.0 * kDegToRad, 5.0 * kDegToRad};
  double transform_speed = 0.25;   // rad/s, joint sweep
  double transform_hold = 4.0;     // s at the extended pose
  double transform_start = 3.0;    // s of hover before the sweep
  int lift_leg = 0;
  double lift_hip_pitch = -28.0 * kDegToRad;
  double lift_start = 5.0;
  double lift_hold = 30.0;
  double lift_speed = 0.05;        // rad/s, hip pitch
  double takeoff_height = 0.5;     // climb above the terrestrial CoG height
  double takeoff_time = 3.0;
  double post_takeoff = 10.0;
  double stand_settle = 2.0;
  // acceleration limit of the joint setpoint shaper, rad/s^2
  double joint_accel = 3.0;

  std::string qp_dump_path;  // empty disables the dump

  double default_duration() const;
  double effective_duration() const { return duration > 0.0 ? duration : default_duration(); }
};

struct LogRow
{
  double t = 0.0;
  std::string mode;
  std::string phase;
  Vec3 cog = Vec3::Zero();
  Vec3 cog_target = Vec3::Zero();
  Vec3 base = Vec3::Zero();
  Vec3 base_target = Vec3::Zero();
  Vec3 rpy = Vec3::Zero();
  Vec3 rpy_target = Vec3::Zero();
  Vec3 position_error = Vec3::Zero();  // controlled point: CoG in flight, baselink on the ground
  Vec3 rotation_error = Vec3::Zero();  // rpy difference, rad
  JointVector q = JointVector::Zero();
  JointVector q_target = JointVector::Zero();
  JointVector tau_plan = JointVector::Zero();
  JointVector tau_static = JointVector::Zero();
  RotorVector thrust = RotorVector::Zero();
  RotorVector thrust_cmd = RotorVector::Zero();
  RotorVector phi = RotorVector::Zero();
  RotorVector theta = RotorVector::Zero();
  Vec6 wrench = Vec6::Zero();
  std::array<double, kNumLegs> planned_normal{};
  std::array<double, kNumLegs> sim_normal{};
  int planned_contacts = 0;
  int sim_contacts = 0;
  double support_margin = 0.0;  // NaN unless three feet are planned
  double torque_balance_residual = 0.0;
  double refine_residual = 0.0;
  int refine_iterations = 0;
  bool allocation_ok = true;
  double altitude_force = 0.0;
};

struct RunSummary
{
  std::string scenario;
  std::string status = "ok";  // ok | diverged | infeasible | error
  std::string reason;
  double duration = 0.0;
  std::uint64_t seed = 0;
  int ticks = 0;

  Vec3 rms_position_error = Vec3::Zero();
  Vec3 rms_rotation_error_deg = Vec3::Zero();
  Vec3 steady_position_error = Vec3::Zero();      // max abs over the steady window
  Vec3 steady_rotation_error_deg = Vec3::Zero();
  double steady_window = 0.0;

  int infeasible_count = 0;
  int refine_nonconverged = 0;
  double max_refine_residual = 0.0;
  double max_torque_balance_residual = 0.0;
  double max_planned_torque = 0.0;
  double max_static_torque = 0.0;
  int min_sim_contacts = kNumLegs;
  int min_planned_contacts = kNumLegs;
  int support_violations = 0;
  double min_support_margin = 0.0;
  double min_standing_normal = 0.0;

  // scenario specific, NaN when not applicable
  double recovery_error = 0.0;     // transform: max |e_z| from 3 s after the sweep
  double max_joint_speed = 0.0;
  double lifted_thrust_change = 0.0;
  double standing_thrust_change = 0.0;
  double drift = 0.0;              // walk: torso xy distance from the nominal plan
  double drift_yaw_deg = 0.0;
  int cycles_completed = 0;
  double takeoff_time = 0.0;
};

struct SimLog
{
  std::vector<LogRow> rows;
  std::vector<std::string> events;
  RunSummary summary;
};

SimLog run_scenario(const ScenarioConfig& cfg);

void write_log_csv(const SimLog& log, const std::filesystem::path& file);
void write_plot_csvs(const SimLog& log, const std::filesystem::path& dir);
std::string summary_json(const RunSummary& s);
void write_outputs(const SimLog& log, const std::filesystem::path& dir);

// baselink pose and joint angles for a level robot resting its feet on the ground
RobotState standing_state(const RobotDescription& desc, const LegPose& pose, double ground_height = 0.0);
JointVector pose_joints(const LegPose& pose);

}  // namespace vecquad
