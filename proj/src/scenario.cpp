#include "vecquad/scenario.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <memory>
#include <random>

#include <spdlog/spdlog.h>

#include "json.hpp"

namespace vecquad {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

enum class Mode { Aerial, Terrestrial };

const char* mode_name(Mode m) { return m == Mode::Aerial ? "aerial" : "terrestrial"; }

}  // namespace

std::string to_string(ScenarioKind k)
{
  switch (k) {
    case ScenarioKind::Hover: return "hover";
    case ScenarioKind::Transform: return "transform";
    case ScenarioKind::LegLift: return "leg-lift";
    case ScenarioKind::Walk: return "walk";
    case ScenarioKind::Hybrid: return "hybrid";
  }
  return "unknown";
}

ScenarioKind scenario_from_string(const std::string& name)
{
  for (ScenarioKind k : {ScenarioKind::Hover, ScenarioKind::Transform, ScenarioKind::LegLift, ScenarioKind::Walk,
                         ScenarioKind::Hybrid}) {
    if (to_string(k) == name) return k;
  }
  throw std::invalid_argument("unknown scenario '" + name + "'");
}

JointVector pose_joints(const LegPose& pose)
{
  JointVector q = JointVector::Zero();
  for (int leg = 0; leg < kNumLegs; ++leg) {
    q(joint_index(leg, JointRole::HipPitch)) = pose.hip_pitch;
    q(joint_index(leg, JointRole::KneePitch)) = pose.knee_pitch;
  }
  return q;
}

namespace {

RobotState resting_state(const RobotDescription& desc, const JointVector& q, double ground)
{
  RobotState s;
  s.joint_angles = q;
  const FrameSet f = forward_kinematics(desc, s);
  double lowest = std::numeric_limits<double>::infinity();
  for (int leg = 0; leg < kNumLegs; ++leg) lowest = std::min(lowest, f.foot_center[leg].z() + f.cog_in_base.z());
  s.base_position = Vec3(0.0, 0.0, ground + desc.foot_radius - lowest);
  return s;
}

double sweep_time(const JointVector& from, const JointVector& to, double speed)
{
  return (to - from).cwiseAbs().maxCoeff() / speed;
}

JointVector interpolate(const JointVector& from, const JointVector& to, double s)
{
  s = std::clamp(s, 0.0, 1.0);
  return from + s * (to - from);
}

}  // namespace

RobotState standing_state(const RobotDescription& desc, const LegPose& pose, double ground_height)
{
  return resting_state(desc, pose_joints(pose), ground_height);
}

double ScenarioConfig::default_duration() const
{
  const double sweep = sweep_time(pose_joints(standing), pose_joints(extended), transform_speed);
  switch (kind) {
    case ScenarioKind::Hover: return 10.0;
    case ScenarioKind::Transform: return transform_start + 2.0 * sweep + transform_hold + 8.0;
    case ScenarioKind::LegLift: return lift_start + lift_hold + 10.0;
    case ScenarioKind::Walk:
    case ScenarioKind::Hybrid: return 600.0;
  }
  return 10.0;
}

namespace {

class Runner
{
public:
  explicit Runner(const ScenarioConfig& cfg)
    : cfg_(cfg), desc_(cfg.robot), pos_(cfg.gains), att_(cfg.gains), rng_(cfg.sim.seed)
  {
    desc_.validate();
    cfg_.gains.validate();
    cfg_.sim.validate();
    if (!(cfg_.control_rate > 0.0)) throw std::invalid_argument("control rate must be positive");
    substeps_ = std::max(1, static_cast<int>(std::lround(1.0 / (cfg_.control_rate * cfg_.sim.timestep))));
    control_dt_ = substeps_ * cfg_.sim.timestep;
    duration_ = cfg_.effective_duration();
    if (!(duration_ > 0.0)) throw std::invalid_argument("duration must be positive");

    std::uniform_real_distribution<double> bias(-1.0, 1.0);
    for (int j = 0; j < kNumJoints; ++j) bias_(j) = cfg_.sim.joint_bias * bias(rng_);

    if (!cfg_.qp_dump_path.empty()) {
      dump_ = std::make_unique<std::ofstream>(cfg_.qp_dump_path);
      if (!*dump_) throw std::runtime_error("cannot open QP dump file " + cfg_.qp_dump_path);
    }
    setup();
  }

  SimLog run()
  {
    log_.summary.scenario = to_string(cfg_.kind);
    log_.summary.seed = cfg_.sim.seed;
    try {
      while (sim_->time() < duration_ - 1e-9 && !finished_) {
        control_tick();
        for (int k = 0; k < substeps_; ++k) sim_->step(act_);
      }
    } catch (const SimDivergence& e) {
      log_.summary.status = "diverged";
      log_.summary.reason = e.what();
      log_.events.push_back(e.what());
    } catch (const std::exception& e) {
      log_.summary.status = "error";
      log_.summary.reason = e.what();
      log_.events.push_back(e.what());
    }
    if (log_.summary.status == "ok" && log_.summary.infeasible_count > 0 && persistent_infeasible_) {
      log_.summary.status = "infeasible";
      log_.summary.reason = first_infeasible_;
    }
    log_.summary.duration = sim_->time();
    summarize();
    return std::move(log_);
  }

private:
  void setup()
  {
    const JointVector standing = pose_joints(cfg_.standing);
    RobotState init;
    switch (cfg_.kind) {
      case ScenarioKind::Hover:
      case ScenarioKind::Transform: {
        mode_ = Mode::Aerial;
        init.joint_angles = standing;
        const FrameSet f = forward_kinematics(desc_, init);
        init.base_position = Vec3(0.0, 0.0, cfg_.hover_height) - f.cog_in_base;
        q_target_ = standing;
        break;
      }
      case ScenarioKind::LegLift: {
        mode_ = Mode::Terrestrial;
        init = resting_state(desc_, standing, cfg_.sim.ground_height);
        q_target_ = standing;
        planned_.set();
        break;
      }
      case ScenarioKind::Walk:
      case ScenarioKind::Hybrid: {
        mode_ = Mode::Terrestrial;
        const RobotState square = resting_state(desc_, standing, cfg_.sim.ground_height);
        const FrameSet f = forward_kinematics(desc_, square);
        std::array<Vec3, kNumLegs> feet{};
        for (int leg = 0; leg < kNumLegs; ++leg) feet[leg] = f.to_world(f.foot_center[leg]);
        // rear feet staggered by half a stride so the CoG keeps a margin in
        // every support triangle of the cycle
        feet[2].x() -= 0.5 * cfg_.gait.stride;
        feet[3].x() += 0.5 * cfg_.gait.stride;
        gait_ = gait_init(desc_, cfg_.gait, square.base_position, feet);
        init = resting_state(desc_, gait_.q_target, cfg_.sim.ground_height);
        init.base_position.head<2>() = square.base_position.head<2>();
        q_target_ = gait_.q_target;
        planned_.set();
        break;
      }
    }
    initial_terrestrial_ = mode_ == Mode::Terrestrial;
    base_target_ = init.base_position;
    torso_height_ = init.base_position.z();

    const FrameSet f0 = forward_kinematics(desc_, init);
    cog_target_ = f0.cog_position;
    cog_start_ = cog_target_;
    yaw_target_ = 0.0;
    init.contacts = planned_;

    // start the actuators at the first allocation so the run begins in trim
    RotorCommands none{};
    AllocationResult first = allocate(desc_, f0, none, request(f0, init));
    if (first.ok) {
      for (int i = 0; i < kNumRotors; ++i) {
        init.thrust(i) = std::clamp(first.commands[i].thrust, 0.0, desc_.max_thrust);
        init.phi(i) = first.commands[i].phi;
        init.theta(i) = first.commands[i].theta;
      }
      commands_ = first.commands;
    }
    act_.rotors = commands_;
    shaper_.reset(q_target_);
    act_.joint_targets = q_target_;
    if (cfg_.kind == ScenarioKind::Hover) {
      const Vec3 cog = f0.cog_position + cfg_.hover_initial_offset;
      init.base_orientation = from_rpy(cfg_.hover_initial_rpy);
      init.base_position = cog - init.base_orientation * f0.cog_in_base;
    }
    sim_ = std::make_unique<Simulator>(desc_, cfg_.sim, init);
    initial_base_ = init.base_position;
  }

  RobotState measure()
  {
    RobotState m = sim_->state();
    if (cfg_.sim.joint_bias > 0.0 || cfg_.sim.joint_noise > 0.0) {
      std::normal_distribution<double> n(0.0, 1.0);
      for (int j = 0; j < kNumJoints; ++j) {
        const double noise = cfg_.sim.joint_noise > 0.0 ? cfg_.sim.joint_noise * n(rng_) : 0.0;
        m.joint_angles(j) = std::clamp(m.joint_angles(j) + bias_(j) + noise, desc_.joint_limits[j].lower,
                                       desc_.joint_limits[j].upper);
      }
    }
    if (cfg_.sim.position_noise > 0.0) {
      std::normal_distribution<double> n(0.0, cfg_.sim.position_noise);
      m.base_position += Vec3(n(rng_), n(rng_), n(rng_));
    }
    if (cfg_.sim.attitude_noise > 0.0) {
      std::normal_distribution<double> n(0.0, cfg_.sim.attitude_noise);
      m.base_orientation = orthonormalize(m.base_orientation * exp_so3(Vec3(n(rng_), n(rng_), n(rng_))));
    }
    return m;
  }

  AllocationRequest request(const FrameSet& f, const RobotState& s, const LinkForces* offsets = nullptr) const
  {
    AllocationRequest req;
    const ModeSettings& ms = mode_ == Mode::Aerial ? cfg_.aerial : cfg_.terrestrial;
    req.weights = ms.weights;
    req.bounds.max_thrust = desc_.max_thrust;
    req.bounds.max_joint_torque = ms.max_joint_torque;
    req.bounds.box_half_width = cfg_.box_half_width;
    req.bounds.friction = cfg_.planning_friction;
    req.refine = cfg_.refine;
    req.refine_enabled = cfg_.refine_enabled;
    req.contacts = mode_ == Mode::Aerial ? ContactSet{} : planned_;
    if (offsets) req.offsets = *offsets;
    for (int leg = 0; leg < kNumLegs; ++leg) {
      if (load_[leg] < 1.0) req.bounds.max_normal[leg] = load_[leg] * load_[leg] * load_scale_[leg];
    }
    // gravity compensation; flight replaces it with the feedback wrench
    req.wrench.head<3>() = s.base_orientation.transpose() * Vec3(0.0, 0.0, f.total_mass * kGravity);
    return req;
  }

  void scripted_targets(double t, const RobotState& meas, const FrameSet& frames)
  {
    switch (cfg_.kind) {
      case ScenarioKind::Hover:
        phase_ = "hover";
        break;
      case ScenarioKind::Transform: {
        const JointVector a = pose_joints(cfg_.standing), b = pose_joints(cfg_.extended);
        const double sweep = sweep_time(a, b, cfg_.transform_speed);
        const double t1 = cfg_.transform_start, t2 = t1 + sweep, t3 = t2 + cfg_.transform_hold, t4 = t3 + sweep;
        motion_end_ = t4;
        if (t < t1) {
          q_target_ = a;
          phase_ = "hover";
        } else if (t < t2) {
          q_target_ = interpolate(a, b, (t - t1) / sweep);
          phase_ = "extend";
        } else if (t < t3) {
          q_target_ = b;
          phase_ = "hold";
        } else if (t < t4) {
          q_target_ = interpolate(b, a, (t - t3) / sweep);
          phase_ = "retract";
        } else {
          q_target_ = a;
          phase_ = "hover";
        }
        break;
      }
      case ScenarioKind::LegLift: {
        const int leg = cfg_.lift_leg;
        const int j = joint_index(leg, JointRole::HipPitch);
        const double q0 = cfg_.standing.hip_pitch;
        const double lift = std::abs(cfg_.lift_hip_pitch - q0) / cfg_.lift_speed;
        const double t1 = cfg_.lift_start;
        const double t2 = t1 + cfg_.gait.load_transfer_time;
        const double t3 = t2 + cfg_.lift_hold;
        // lowered at the lift speed until the foot is lift_height above the
        // ground, then commanded straight to the standing angle
        LegAngles pose{0.0, q0, cfg_.standing.knee_pitch};
        const double q_low = raised_hip_pitch(desc_, leg, pose, 0.0, cfg_.gait.lift_height);
        const double t4 = t3 + std::abs(cfg_.lift_hip_pitch - q_low) / cfg_.lift_speed;
        lift_end_ = t2 + lift;
        hold_end_ = t3;
        releasing_ = -1;
        if (t < t1) {
          phase_ = "stand";
        } else if (t < t2) {
          releasing_ = leg;
          phase_ = "unload";
        } else if (t < t3) {
          planned_.set();
          planned_.reset(leg);
          q_target_(j) = q0 + std::clamp((t - t2) / lift, 0.0, 1.0) * (cfg_.lift_hip_pitch - q0);
          phase_ = t < lift_end_ ? "lift" : "hold";
        } else if (t < t4) {
          q_target_(j) = cfg_.lift_hip_pitch + (t - t3) / (t4 - t3) * (q_low - cfg_.lift_hip_pitch);
          phase_ = "descend";
        } else if (!planned_.test(leg)) {
          q_target_(j) = q0;
          phase_ = "lowering";
          if (touchdown_detect(q_target_(j), meas.joint_angles(j), cfg_.gait.touchdown_threshold)) {
            planned_.set();
            log_.events.push_back("touchdown of leg " + std::to_string(leg) + " at t=" + std::to_string(t));
          }
        } else {
          phase_ = "stand";
        }
        break;
      }
      case ScenarioKind::Walk:
      case ScenarioKind::Hybrid:
        walk_targets(t, meas, frames);
        break;
    }
  }

  // planned normal force caps ramp down before a foot lifts and back up
  // after it is planned to stand again
  void update_load()
  {
    const double rate = control_dt_ / std::max(cfg_.gait.load_transfer_time, 1e-9);
    for (int leg = 0; leg < kNumLegs; ++leg) {
      if (mode_ == Mode::Aerial || !planned_.test(leg)) {
        load_[leg] = 0.0;
        load_scale_[leg] = 0.0;
      } else if (leg == releasing_) {
        if (load_[leg] >= 1.0) load_scale_[leg] = std::max(last_plan_.contact_forces[leg].z(), 0.0);
        load_[leg] = std::max(0.0, load_[leg] - rate);
      } else {
        if (load_scale_[leg] <= 0.0) load_scale_[leg] = 0.25 * desc_.total_mass() * kGravity;
        load_[leg] = std::min(1.0, load_[leg] + rate);
      }
    }
  }

  void walk_targets(double t, const RobotState& meas, const FrameSet& frames)
  {
    releasing_ = -1;
    if (mode_ == Mode::Aerial) {
      const double s = std::clamp((t - takeoff_start_) / cfg_.takeoff_time, 0.0, 1.0);
      cog_target_ = cog_start_ + Vec3(0.0, 0.0, s * cfg_.takeoff_height);
      cog_target_velocity_ = (s > 0.0 && s < 1.0) ? Vec3(0.0, 0.0, cfg_.takeoff_height / cfg_.takeoff_time)
                                                   : Vec3::Zero();
      phase_ = s < 1.0 ? "takeoff" : "hover";
      if (t >= takeoff_start_ + cfg_.takeoff_time + cfg_.post_takeoff) finished_ = true;
      return;
    }
    if (t < cfg_.stand_settle) {
      phase_ = "stand";
      return;
    }
    if (!gait_.done()) {
      GaitEvents ev;
      ev.dt = control_dt_;
      ev.q = meas.joint_angles;
      ev.torso_position = meas.base_position;
      ev.torso_orientation = meas.base_orientation;
      for (int leg = 0; leg < kNumLegs; ++leg) ev.feet[leg] = frames.to_world(frames.foot_center[leg]);
      gait_ = gait_step(desc_, cfg_.gait, gait_, ev);
      q_target_ = gait_.q_target;
      planned_ = gait_.contacts;
      releasing_ = gait_.releasing;
      base_target_ = gait_.torso_target;
      phase_ = to_string(gait_.phase);
      if (gait_.done()) {
        gait_done_time_ = t;
        log_.events.push_back("gait finished at t=" + std::to_string(t));
      }
      return;
    }
    phase_ = "stand";
    if (cfg_.kind == ScenarioKind::Walk) {
      if (t >= gait_done_time_ + cfg_.gait.settle_time) finished_ = true;
      return;
    }
    if (t >= gait_done_time_ + cfg_.gait.settle_time) {
      mode_ = Mode::Aerial;
      takeoff_start_ = t;
      log_.summary.takeoff_time = t;
      cog_start_ = frames.cog_position;
      cog_target_ = cog_start_;
      yaw_target_ = rpy(meas.base_orientation).z();
      pos_.reset();
      att_.reset();
      planned_.reset();
      phase_ = "takeoff";
      log_.events.push_back("switched to flight at t=" + std::to_string(t));
    }
  }

  void control_tick()
  {
    const double t = sim_->time();
    const RobotState meas = measure();
    FrameSet frames = forward_kinematics(desc_, meas);
    cog_target_velocity_.setZero();
    scripted_targets(t, meas, frames);
    update_load();

    AllocationRequest req = request(frames, meas);
    double altitude_force = 0.0;
    const Mat3 target_rotation = rot_z(yaw_target_);
    if (mode_ == Mode::Aerial) {
      const Vec3 f = pos_.update(cog_target_, cog_target_velocity_, frames.cog_position, sim_->cog_velocity(),
                                 meas.base_orientation, frames.total_mass, Vec3::Zero(), control_dt_);
      const Vec3 tau = att_.update(meas.base_orientation, target_rotation, meas.base_angular_velocity, Vec3::Zero(),
                                   frames.inertia, Vec3::Zero(), control_dt_);
      req.wrench << f, tau;
    } else {
      altitude_force = altitude_feedback(torso_height_, meas.base_position.z(), cfg_.gains.altitude_p);
      req.offsets = altitude_allocation(altitude_force, frames).delta;
    }

    QPProblem problem;
    AllocationResult res = allocate(desc_, frames, commands_, req, dump_ ? &problem : nullptr);
    if (dump_) *dump_ << qp_to_json(problem, res.solution) << '\n';
    if (res.ok) {
      commands_ = res.commands;
      last_plan_ = res.solution;
      consecutive_infeasible_ = 0;
      if (cfg_.refine_enabled && !res.refine.converged) ++log_.summary.refine_nonconverged;
    } else {
      ++log_.summary.infeasible_count;
      if (++consecutive_infeasible_ > 50) persistent_infeasible_ = true;
      if (first_infeasible_.empty()) {
        first_infeasible_ = "allocation infeasible at t=" + std::to_string(t) + ": " + res.solution.message;
        log_.events.push_back(first_infeasible_);
      }
    }
    act_.rotors = commands_;
    act_.joint_targets = shaper_.step(q_target_, control_dt_);
    record(t, req, res, altitude_force);
  }

  void record(double t, const AllocationRequest& req, const AllocationResult& res, double altitude_force)
  {
    const RobotState& truth = sim_->state();
    const FrameSet& tf = sim_->frames();
    LogRow row;
    row.t = t;
    row.mode = mode_name(mode_);
    row.phase = phase_;
    row.cog = tf.cog_position;
    row.cog_target = cog_target_;
    row.base = truth.base_position;
    row.base_target = base_target_;
    row.base_target.z() = torso_height_;
    row.rpy = rpy(truth.base_orientation);
    row.rpy_target = Vec3(0.0, 0.0, yaw_target_);
    if (mode_ == Mode::Aerial) {
      row.position_error = row.cog - row.cog_target;
    } else {
      row.position_error = row.base - row.base_target;
    }
    row.rotation_error = rpy(rot_z(yaw_target_).transpose() * truth.base_orientation);
    row.q = truth.joint_angles;
    row.q_target = q_target_;
    row.tau_plan = last_plan_.joint_torques;
    row.tau_static = sim_->static_joint_torques();
    row.thrust = truth.thrust;
    for (int i = 0; i < kNumRotors; ++i) row.thrust_cmd(i) = commands_[i].thrust;
    row.phi = truth.phi;
    row.theta = truth.theta;
    row.wrench = req.wrench;
    for (int leg = 0; leg < kNumLegs; ++leg) {
      row.planned_normal[leg] = last_plan_.contact_forces[leg].z();
      row.sim_normal[leg] = sim_->foot_forces()[leg].z();
    }
    row.planned_contacts = mode_ == Mode::Aerial ? 0 : static_cast<int>(planned_.count());
    row.sim_contacts = sim_->contact_count();
    row.support_margin = kNaN;
    if (mode_ == Mode::Terrestrial && row.planned_contacts == 3) {
      std::array<Vec3, 3> tri{};
      int k = 0;
      for (int leg = 0; leg < kNumLegs; ++leg) {
        if (planned_.test(leg)) tri[k++] = tf.to_world(tf.contact_point[leg]);
      }
      row.support_margin = triangle_margin(tf.cog_position, tri[0], tri[1], tri[2]);
    }
    row.torque_balance_residual = (row.tau_plan - row.tau_static).cwiseAbs().maxCoeff();
    row.refine_residual = res.ok ? res.refine.residual : kNaN;
    row.refine_iterations = res.ok ? res.refine.iterations : 0;
    row.allocation_ok = res.ok;
    row.altitude_force = altitude_force;
    log_.rows.push_back(row);
  }

  void summarize();

  ScenarioConfig cfg_;
  RobotDescription desc_;
  PositionController pos_;
  AttitudeController att_;
  std::mt19937_64 rng_;
  JointVector bias_ = JointVector::Zero();
  std::unique_ptr<Simulator> sim_;
  std::unique_ptr<std::ofstream> dump_;
  Actuation act_;
  RotorCommands commands_{};
  AllocationSolution last_plan_;
  SimLog log_;

  int substeps_ = 10;
  double control_dt_ = 0.01;
  double duration_ = 0.0;
  Mode mode_ = Mode::Aerial;
  std::string phase_;
  bool finished_ = false;

  JointVector q_target_ = JointVector::Zero();
  ContactSet planned_{};
  Vec3 cog_target_ = Vec3::Zero();
  Vec3 cog_target_velocity_ = Vec3::Zero();
  Vec3 cog_start_ = Vec3::Zero();
  Vec3 base_target_ = Vec3::Zero();
  Vec3 initial_base_ = Vec3::Zero();
  double torso_height_ = 0.0;
  double yaw_target_ = 0.0;

  GaitState gait_;
  double gait_done_time_ = 0.0;
  double takeoff_start_ = 0.0;
  double motion_end_ = 0.0;
  double lift_end_ = 0.0;
  int releasing_ = -1;
  JointShaper shaper_{desc_.max_joint_speed, cfg_.joint_accel};
  std::array<double, kNumLegs> load_{1.0, 1.0, 1.0, 1.0};
  std::array<double, kNumLegs> load_scale_{};
  double hold_end_ = 0.0;

  bool initial_terrestrial_ = false;
  int consecutive_infeasible_ = 0;
  bool persistent_infeasible_ = false;
  std::string first_infeasible_;
};

template <typename Pred>
void window_stats(const std::vector<LogRow>& rows, Pred in_window, Vec3& pos_max, Vec3& rot_max_deg)
{
  pos_max.setZero();
  rot_max_deg.setZero();
  for (const auto& r : rows) {
    if (!in_window(r)) continue;
    pos_max = pos_max.cwiseMax(r.position_error.cwiseAbs());
    rot_max_deg = rot_max_deg.cwiseMax(r.rotation_error.cwiseAbs() * kRadToDeg);
  }
}

void Runner::summarize()
{
  RunSummary& s = log_.summary;
  const auto& rows = log_.rows;
  s.ticks = static_cast<int>(rows.size());
  s.recovery_error = kNaN;
  s.lifted_thrust_change = kNaN;
  s.standing_thrust_change = kNaN;
  s.drift = kNaN;
  s.drift_yaw_deg = kNaN;
  s.min_support_margin = kNaN;
  s.min_standing_normal = kNaN;
  if (rows.empty()) return;

  Vec3 pos_sq = Vec3::Zero(), rot_sq = Vec3::Zero();
  double min_margin = std::numeric_limits<double>::infinity();
  JointVector prev_q = rows.front().q;
  for (size_t k = 0; k < rows.size(); ++k) {
    const LogRow& r = rows[k];
    pos_sq += r.position_error.cwiseAbs2();
    rot_sq += (r.rotation_error * kRadToDeg).cwiseAbs2();
    s.max_planned_torque = std::max(s.max_planned_torque, r.tau_plan.cwiseAbs().maxCoeff());
    // a ground start drops onto the feet first; that impact is not a joint load
    const bool settling = initial_terrestrial_ && r.t < cfg_.stand_settle;
    if (!settling) {
      s.max_torque_balance_residual = std::max(s.max_torque_balance_residual, r.torque_balance_residual);
      s.max_static_torque = std::max(s.max_static_torque, r.tau_static.cwiseAbs().maxCoeff());
    }
    if (std::isfinite(r.refine_residual)) s.max_refine_residual = std::max(s.max_refine_residual, r.refine_residual);
    if (r.mode == "terrestrial" && r.t >= cfg_.stand_settle) {
      s.min_sim_contacts = std::min(s.min_sim_contacts, r.sim_contacts);
      s.min_planned_contacts = std::min(s.min_planned_contacts, r.planned_contacts);
    }
    if (std::isfinite(r.support_margin)) {
      min_margin = std::min(min_margin, r.support_margin);
      if (r.support_margin <= 0.0) ++s.support_violations;
    }
    if (k > 0) {
      const double dt = r.t - rows[k - 1].t;
      if (dt > 0.0) s.max_joint_speed = std::max(s.max_joint_speed, ((r.q - prev_q) / dt).cwiseAbs().maxCoeff());
    }
    prev_q = r.q;
  }
  const double n = static_cast<double>(rows.size());
  s.rms_position_error = (pos_sq / n).cwiseSqrt();
  s.rms_rotation_error_deg = (rot_sq / n).cwiseSqrt();
  if (std::isfinite(min_margin)) s.min_support_margin = min_margin;
  if (s.min_sim_contacts == kNumLegs && cfg_.kind != ScenarioKind::LegLift && cfg_.kind != ScenarioKind::Walk &&
      cfg_.kind != ScenarioKind::Hybrid) {
    s.min_sim_contacts = 0;
    s.min_planned_contacts = 0;
  }

  const double t_end = rows.back().t;
  auto steady = [&](double from, double to) {
    s.steady_window = to - from;
    window_stats(rows, [&](const LogRow& r) { return r.t >= from && r.t <= to; }, s.steady_position_error,
                 s.steady_rotation_error_deg);
  };

  switch (cfg_.kind) {
    case ScenarioKind::Hover:
      steady(std::max(0.0, t_end - 5.0), t_end);
      break;
    case ScenarioKind::Transform: {
      steady(std::max(0.0, t_end - 3.0), t_end);
      double rec = 0.0;
      for (const auto& r : rows) {
        if (r.t >= motion_end_ + 3.0) rec = std::max(rec, std::abs(r.position_error.z()));
      }
      s.recovery_error = rec;
      break;
    }
    case ScenarioKind::LegLift: {
      steady(std::max(lift_end_, hold_end_ - 5.0), hold_end_);
      RotorVector pre = RotorVector::Zero(), hold = RotorVector::Zero();
      int npre = 0, nhold = 0;
      double min_normal = std::numeric_limits<double>::infinity();
      for (const auto& r : rows) {
        if (r.t >= cfg_.lift_start - 2.0 && r.t < cfg_.lift_start) {
          pre += r.thrust;
          ++npre;
        }
        if (r.t >= lift_end_ + 2.0 && r.t <= hold_end_) {
          hold += r.thrust;
          ++nhold;
        }
        if (r.t >= cfg_.lift_start && r.t <= hold_end_) {
          for (int leg = 0; leg < kNumLegs; ++leg) {
            if (leg != cfg_.lift_leg) min_normal = std::min(min_normal, r.sim_normal[leg]);
          }
        }
      }
      if (npre > 0 && nhold > 0) {
        const RotorVector d = hold / nhold - pre / npre;
        double lifted = 0.0, standing = 0.0;
        for (int i = 0; i < kNumRotors; ++i) {
          if (leg_of_link(i) == cfg_.lift_leg) {
            lifted += d(i) / 2.0;
          } else {
            standing += std::abs(d(i)) / (kNumRotors - 2);
          }
        }
        s.lifted_thrust_change = lifted;
        s.standing_thrust_change = standing;
      }
      if (std::isfinite(min_normal)) s.min_standing_normal = min_normal;
      break;
    }
    case ScenarioKind::Walk:
    case ScenarioKind::Hybrid: {
      s.cycles_completed = gait_.cycle;
      // drift is evaluated on the last terrestrial row
      const LogRow* last = nullptr;
      for (const auto& r : rows) {
        if (r.mode == "terrestrial") last = &r;
      }
      if (last) {
        const Vec3 nominal = initial_base_ + gait_.cycle * cfg_.gait.stride * Vec3::UnitX();
        s.drift = (last->base - nominal).head<2>().norm();
        s.drift_yaw_deg = last->rpy.z() * kRadToDeg;
      }
      if (cfg_.kind == ScenarioKind::Hybrid) {
        steady(std::max(0.0, t_end - 3.0), t_end);
      } else {
        steady(std::max(0.0, t_end - 1.0), t_end);
      }
      break;
    }
  }
}

}  // namespace

SimLog run_scenario(const ScenarioConfig& cfg)
{
  return Runner(cfg).run();
}

namespace {

void write_vec(std::ostream& os, const Eigen::Ref<const Eigen::VectorXd>& v, double scale = 1.0)
{
  for (int i = 0; i < v.size(); ++i) os << ',' << v(i) * scale;
}

void header_vec(std::ostream& os, const std::string& prefix, int n)
{
  for (int i = 0; i < n; ++i) os << ',' << prefix << i;
}

std::ofstream open_csv(const std::filesystem::path& file)
{
  std::ofstream os(file);
  if (!os) throw std::runtime_error("cannot write " + file.string());
  os << std::setprecision(10);
  return os;
}

}  // namespace

void write_log_csv(const SimLog& log, const std::filesystem::path& file)
{
  std::ofstream os = open_csv(file);
  os << "t,mode,phase,cog_x,cog_y,cog_z,cog_target_x,cog_target_y,cog_target_z,base_x,base_y,base_z,"
        "base_target_x,base_target_y,base_target_z,roll,pitch,yaw,err_x,err_y,err_z,err_roll,err_pitch,err_yaw";
  header_vec(os, "q", kNumJoints);
  header_vec(os, "q_target", kNumJoints);
  header_vec(os, "tau_plan", kNumJoints);
  header_vec(os, "tau_static", kNumJoints);
  header_vec(os, "thrust", kNumRotors);
  header_vec(os, "thrust_cmd", kNumRotors);
  header_vec(os, "phi", kNumRotors);
  header_vec(os, "theta", kNumRotors);
  os << ",wrench_fx,wrench_fy,wrench_fz,wrench_tx,wrench_ty,wrench_tz";
  header_vec(os, "planned_normal", kNumLegs);
  header_vec(os, "sim_normal", kNumLegs);
  os << ",planned_contacts,sim_contacts,support_margin,torque_balance_residual,refine_residual,refine_iterations,"
        "allocation_ok,altitude_force\n";
  for (const auto& r : log.rows) {
    os << r.t << ',' << r.mode << ',' << r.phase;
    write_vec(os, r.cog);
    write_vec(os, r.cog_target);
    write_vec(os, r.base);
    write_vec(os, r.base_target);
    write_vec(os, r.rpy);
    write_vec(os, r.position_error);
    write_vec(os, r.rotation_error);
    write_vec(os, r.q);
    write_vec(os, r.q_target);
    write_vec(os, r.tau_plan);
    write_vec(os, r.tau_static);
    write_vec(os, r.thrust);
    write_vec(os, r.thrust_cmd);
    write_vec(os, r.phi);
    write_vec(os, r.theta);
    write_vec(os, r.wrench);
    for (double v : r.planned_normal) os << ',' << v;
    for (double v : r.sim_normal) os << ',' << v;
    os << ',' << r.planned_contacts << ',' << r.sim_contacts << ',' << r.support_margin << ',' << r.torque_balance_residual
       << ',' << r.refine_residual << ',' << r.refine_iterations << ',' << (r.allocation_ok ? 1 : 0) << ','
       << r.altitude_force << '\n';
  }
}

void write_plot_csvs(const SimLog& log, const std::filesystem::path& dir)
{
  std::ofstream pos = open_csv(dir / "position_errors.csv");
  std::ofstream rot = open_csv(dir / "rotation_errors.csv");
  std::ofstream joints = open_csv(dir / "joint_trajectories.csv");
  std::ofstream torques = open_csv(dir / "joint_torques.csv");
  std::ofstream thrust = open_csv(dir / "rotor_thrusts.csv");
  pos << "t,err_x,err_y,err_z\n";
  rot << "t,err_roll_deg,err_pitch_deg,err_yaw_deg\n";
  joints << "t";
  header_vec(joints, "q_deg", kNumJoints);
  header_vec(joints, "q_target_deg", kNumJoints);
  joints << '\n';
  torques << "t";
  header_vec(torques, "tau_plan", kNumJoints);
  header_vec(torques, "tau_static", kNumJoints);
  torques << '\n';
  thrust << "t";
  header_vec(thrust, "thrust", kNumRotors);
  thrust << '\n';
  for (const auto& r : log.rows) {
    pos << r.t;
    write_vec(pos, r.position_error);
    pos << '\n';
    rot << r.t;
    write_vec(rot, r.rotation_error, kRadToDeg);
    rot << '\n';
    joints << r.t;
    write_vec(joints, r.q, kRadToDeg);
    write_vec(joints, r.q_target, kRadToDeg);
    joints << '\n';
    torques << r.t;
    write_vec(torques, r.tau_plan);
    write_vec(torques, r.tau_static);
    torques << '\n';
    thrust << r.t;
    write_vec(thrust, r.thrust);
    thrust << '\n';
  }
}

std::string summary_json(const RunSummary& s)
{
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  auto vec = [](const Vec3& v) { return nlohmann::json::array({v.x(), v.y(), v.z()}); };
  nlohmann::json j;
  j["scenario"] = s.scenario;
  j["status"] = s.status;
  j["reason"] = s.reason;
  j["duration_s"] = s.duration;
  j["seed"] = s.seed;
  j["ticks"] = s.ticks;
  j["rms_position_error_m"] = vec(s.rms_position_error);
  j["rms_rotation_error_deg"] = vec(s.rms_rotation_error_deg);
  j["steady_position_error_m"] = vec(s.steady_position_error);
  j["steady_rotation_error_deg"] = vec(s.steady_rotation_error_deg);
  j["steady_window_s"] = s.steady_window;
  j["infeasible_count"] = s.infeasible_count;
  j["refine_nonconverged"] = s.refine_nonconverged;
  j["max_refine_residual"] = s.max_refine_residual;
  j["max_torque_balance_residual_nm"] = s.max_torque_balance_residual;
  j["max_planned_torque_nm"] = s.max_planned_torque;
  j["max_static_torque_nm"] = s.max_static_torque;
  j["min_sim_contacts"] = s.min_sim_contacts;
  j["min_planned_contacts"] = s.min_planned_contacts;
  j["support_violations"] = s.support_violations;
  j["min_support_margin_m"] = num(s.min_support_margin);
  j["min_standing_normal_n"] = num(s.min_standing_normal);
  j["recovery_error_m"] = num(s.recovery_error);
  j["max_joint_speed_rad_s"] = s.max_joint_speed;
  j["lifted_thrust_change_n"] = num(s.lifted_thrust_change);
  j["standing_thrust_change_n"] = num(s.standing_thrust_change);
  j["drift_m"] = num(s.drift);
  j["drift_yaw_deg"] = num(s.drift_yaw_deg);
  j["cycles_completed"] = s.cycles_completed;
  j["takeoff_time_s"] = s.takeoff_time;
  return j.dump(2);
}

void write_outputs(const SimLog& log, const std::filesystem::path& dir)
{
  std::filesystem::create_directories(dir);
  write_log_csv(log, dir / "log.csv");
  write_plot_csvs(log, dir);
  std::ofstream os(dir / "summary.json");
  if (!os) throw std::runtime_error("cannot write " + (dir / "summary.json").string());
  os << summary_json(log.summary) << '\n';
}

}  // namespace vecquad
