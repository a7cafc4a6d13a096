#pragma once

#include <stdexcept>

#include "vecquad/thrust.hpp"

namespace vecquad {

double altitude_feedback(double target_height, double height, double gain);

struct AltitudeCommand
{
  double force = 0.0;
  LinkForces delta = zero_vectors<kNumRotors>();  // nonzero only for inner-link rotors
  int rank = 0;
  bool full_rank = false;
};

// least-norm distribution of (0, 0, f_z, 0, 0, 0) over the inner-link rotors
AltitudeCommand altitude_allocation(double force, const FrameSet& frames);

class ReachabilityError : public std::domain_error
{
public:
  ReachabilityError(int leg, double deficit);
  int leg() const { return leg_; }
  // positive: target too far by this much; negative: too close
  double deficit() const { return deficit_; }

private:
  int leg_;
  double deficit_;
};

struct LegAngles
{
  double hip_yaw = 0.0;
  double hip_pitch = 0.0;
  double knee_pitch = 0.0;
};

// target is the foot sphere center in the baselink frame; the knee yaw is held
LegAngles leg_ik(const RobotDescription& desc, int leg, const Vec3& target, double knee_yaw = 0.0);

// foot sphere center in the baselink frame for the given leg joint angles
Vec3 leg_fk(const RobotDescription& desc, int leg, double hip_yaw, double hip_pitch, double knee_yaw, double knee_pitch);

// hip pitch that raises the foot of a leg posed at `angles` by `height` while
// keeping the other joints
double raised_hip_pitch(const RobotDescription& desc, int leg, const LegAngles& angles, double knee_yaw, double height);

bool touchdown_detect(double target_hip_pitch, double hip_pitch, double threshold);

// signed distance of p to the boundary of triangle (a, b, c) in the xy plane,
// positive inside
double triangle_margin(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

struct GaitConfig
{
  double stride = 0.10;
  double lift_height = 0.05;
  double touchdown_threshold = 2.0 * kDegToRad;
  double joint_tolerance = 0.5 * kDegToRad;
  double settle_time = 1.0;
  double torso_speed = 0.04;
  // time over which a foot's planned normal force is ramped to zero before
  // it lifts, and back up after touchdown
  double load_transfer_time = 1.0;
  int cycles = 5;
  bool feedback = false;
};

enum class GaitPhase { Stand, LiftLeg, MoveTorso, Done };
enum class LiftStage { Unload, Raise, ToIntermediate, Lowering };

std::string to_string(GaitPhase p);

// one cycle: front-left, front-right, torso, rear-right, rear-left
constexpr int kGaitTasks = 5;
constexpr int kTorsoTask = 2;
constexpr int kGaitOrder[kGaitTasks] = {0, 1, -1, 2, 3};

struct GaitState
{
  GaitPhase phase = GaitPhase::Stand;
  LiftStage stage = LiftStage::Unload;
  int cursor = 0;     // index into kGaitOrder of the next or current task
  int cycle = 0;      // completed cycles
  int free_leg = -1;
  // leg whose load is being handed over to the others (still in contacts)
  int releasing = -1;
  double timer = 0.0;

  // world frame, foot sphere centers and torso (baselink) position
  std::array<Vec3, kNumLegs> footholds = zero_vectors<kNumLegs>();
  Vec3 next_foothold = Vec3::Zero();
  Vec3 torso_target = Vec3::Zero();
  Vec3 torso_start = Vec3::Zero();

  // absolute plan used by the feedback option
  std::array<Vec3, kNumLegs> initial_footholds = zero_vectors<kNumLegs>();
  Vec3 initial_torso = Vec3::Zero();
  std::array<int, kNumLegs> steps_taken{};
  int torso_moves = 0;

  LegAngles raised;  // current foothold pose with the foot lifted
  LegAngles intermediate;
  LegAngles final_pose;
  JointVector q_target = JointVector::Zero();
  ContactSet contacts{};

  bool done() const { return phase == GaitPhase::Done; }
};

struct GaitEvents
{
  double dt = 0.01;
  JointVector q = JointVector::Zero();
  // measured baselink pose and foot centers, world frame
  Vec3 torso_position = Vec3::Zero();
  Mat3 torso_orientation = Mat3::Identity();
  std::array<Vec3, kNumLegs> feet = zero_vectors<kNumLegs>();
};

GaitState gait_init(const RobotDescription& desc, const GaitConfig& cfg, const Vec3& torso,
                    const std::array<Vec3, kNumLegs>& footholds);

GaitState gait_step(const RobotDescription& desc, const GaitConfig& cfg, GaitState gait, const GaitEvents& ev);

// joint targets for all standing legs given world footholds and a level torso at `torso`
JointVector stance_targets(const RobotDescription& desc, const std::array<Vec3, kNumLegs>& footholds,
                           const Vec3& torso, const JointVector& fallback);

}  // namespace vecquad
