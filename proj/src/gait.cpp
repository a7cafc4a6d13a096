#include "vecquad/gait.hpp"

#include <cmath>
#include <sstream>

#include <spdlog/spdlog.h>

namespace vecquad {

double altitude_feedback(double target_height, double height, double gain)
{
  return gain * (target_height - height);
}

AltitudeCommand altitude_allocation(double force, const FrameSet& frames)
{
  constexpr int kInner = kNumRotors / 2;
  Eigen::Matrix<double, 6, 3 * kInner> q;
  for (int k = 0; k < kInner; ++k) q.middleCols<3>(3 * k) = link_wrench_map(frames, 2 * k);

  AltitudeCommand out;
  out.force = force;
  for (auto& d : out.delta) d.setZero();
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(q);
  cod.setThreshold(1e-9);
  out.rank = static_cast<int>(cod.rank());
  out.full_rank = out.rank == 6;
  if (!out.full_rank) spdlog::warn("altitude allocation: inner rotor map has rank {} < 6", out.rank);
  if (force == 0.0) return out;

  Vec6 dw = Vec6::Zero();
  dw(2) = force;
  const Eigen::VectorXd df = cod.pseudoInverse() * dw;
  for (int k = 0; k < kInner; ++k) out.delta[2 * k] = df.segment<3>(3 * k);
  return out;
}

namespace {

std::string deficit_message(int leg, double deficit)
{
  std::ostringstream os;
  os << "leg " << leg << " target unreachable: " << (deficit > 0 ? "beyond reach by " : "inside reach by ")
     << std::abs(deficit) << " m";
  return os.str();
}

void check_limits(const RobotDescription& desc, int leg, const LegAngles& a)
{
  const double v[3] = {a.hip_yaw, a.hip_pitch, a.knee_pitch};
  const JointRole roles[3] = {JointRole::HipYaw, JointRole::HipPitch, JointRole::KneePitch};
  for (int k = 0; k < 3; ++k) {
    const int j = joint_index(leg, roles[k]);
    if (v[k] < desc.joint_limits[j].lower || v[k] > desc.joint_limits[j].upper) throw JointLimitError(j, v[k]);
  }
}

}  // namespace

ReachabilityError::ReachabilityError(int leg, double deficit)
  : std::domain_error(deficit_message(leg, deficit)), leg_(leg), deficit_(deficit)
{
}

Vec3 leg_fk(const RobotDescription& desc, int leg, double hip_yaw, double hip_pitch, double knee_yaw, double knee_pitch)
{
  const double l = desc.link_length;
  const Mat3 r1 = rot_z(desc.hip_angle(leg) + hip_yaw) * rot_y(hip_pitch);
  const Mat3 r2 = r1 * rot_z(knee_yaw) * rot_y(knee_pitch);
  return desc.hip_position(leg) + r1 * Vec3(l, 0.0, 0.0) + r2 * Vec3(l, 0.0, 0.0);
}

LegAngles leg_ik(const RobotDescription& desc, int leg, const Vec3& target, double knee_yaw)
{
  const double l = desc.link_length;
  const Vec3 t = rot_z(desc.hip_angle(leg)).transpose() * (target - desc.hip_position(leg));
  const double cg = std::cos(knee_yaw), sg = std::sin(knee_yaw);
  const double reach_max = l * std::sqrt(2.0 + 2.0 * std::abs(cg));
  const double reach_min = l * std::sqrt(std::max(0.0, 2.0 - 2.0 * std::abs(cg)));
  const double dist = t.norm();
  // a relative slack so exactly full reach survives rounding
  if (dist > reach_max * (1.0 + 1e-12)) throw ReachabilityError(leg, dist - reach_max);
  if (dist < reach_min || std::abs(cg) < 1e-12) throw ReachabilityError(leg, dist - reach_min);

  const double c3 = std::clamp((t.squaredNorm() - 2.0 * l * l) / (2.0 * l * l * cg), -1.0, 1.0);
  LegAngles a;
  a.knee_pitch = std::acos(c3);
  const double s3 = std::sin(a.knee_pitch);
  // foot relative to the hip expressed after the hip yaw/pitch rotations
  const Vec3 v = l * Vec3(1.0 + cg * c3, sg * c3, -s3);

  const double rho = std::hypot(t.x(), t.y());
  if (rho < std::abs(v.y())) throw ReachabilityError(leg, std::abs(v.y()) - rho);
  a.hip_yaw = wrap_angle(std::atan2(t.y(), t.x()) - std::asin(v.y() / rho));
  const double wx = std::sqrt(std::max(0.0, rho * rho - v.y() * v.y()));
  a.hip_pitch = wrap_angle(std::atan2(v.z(), v.x()) - std::atan2(t.z(), wx));
  check_limits(desc, leg, a);
  return a;
}

double raised_hip_pitch(const RobotDescription& desc, int leg, const LegAngles& angles, double knee_yaw, double height)
{
  const double l = desc.link_length;
  const double c3 = std::cos(angles.knee_pitch);
  const Vec3 v = l * Vec3(1.0 + std::cos(knee_yaw) * c3, std::sin(knee_yaw) * c3, -std::sin(angles.knee_pitch));
  const double r = std::hypot(v.x(), v.z());
  const double base = std::atan2(v.z(), v.x());
  const double wz = r * std::sin(base - angles.hip_pitch);
  const double s = (wz + height) / r;
  if (std::abs(s) > 1.0) throw ReachabilityError(leg, std::abs(wz + height) - r);
  const double pitch = wrap_angle(base - std::asin(s));
  LegAngles check = angles;
  check.hip_pitch = pitch;
  check_limits(desc, leg, check);
  return pitch;
}

bool touchdown_detect(double target_hip_pitch, double hip_pitch, double threshold)
{
  return target_hip_pitch - hip_pitch < threshold;
}

double triangle_margin(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c)
{
  const Eigen::Vector2d pts[3] = {a.head<2>(), b.head<2>(), c.head<2>()};
  const Eigen::Vector2d q = p.head<2>();
  auto cross = [](const Eigen::Vector2d& u, const Eigen::Vector2d& v) { return u.x() * v.y() - u.y() * v.x(); };
  const double orient = cross(pts[1] - pts[0], pts[2] - pts[0]) >= 0.0 ? 1.0 : -1.0;
  double margin = std::numeric_limits<double>::infinity();
  for (int e = 0; e < 3; ++e) {
    const Eigen::Vector2d& s = pts[e];
    const Eigen::Vector2d d = pts[(e + 1) % 3] - s;
    const double len = d.norm();
    if (len == 0.0) return -std::numeric_limits<double>::infinity();
    margin = std::min(margin, orient * cross(d, q - s) / len);
  }
  return margin;
}

std::string to_string(GaitPhase p)
{
  switch (p) {
    case GaitPhase::Stand: return "stand";
    case GaitPhase::LiftLeg: return "lift_leg";
    case GaitPhase::MoveTorso: return "move_torso";
    case GaitPhase::Done: return "done";
  }
  return "unknown";
}

namespace {

void set_leg(JointVector& q, int leg, const LegAngles& a, double knee_yaw)
{
  q(joint_index(leg, JointRole::HipYaw)) = a.hip_yaw;
  q(joint_index(leg, JointRole::HipPitch)) = a.hip_pitch;
  q(joint_index(leg, JointRole::KneeYaw)) = knee_yaw;
  q(joint_index(leg, JointRole::KneePitch)) = a.knee_pitch;
}

double leg_error(const GaitState& g, const GaitEvents& ev, int leg)
{
  return (g.q_target.segment<4>(4 * leg) - ev.q.segment<4>(4 * leg)).cwiseAbs().maxCoeff();
}

double stance_error(const GaitState& g, const GaitEvents& ev)
{
  double e = 0.0;
  for (int leg = 0; leg < kNumLegs; ++leg) {
    if (leg != g.free_leg) e = std::max(e, leg_error(g, ev, leg));
  }
  return e;
}

void enter_stand(const RobotDescription& desc, GaitState& g)
{
  g.phase = GaitPhase::Stand;
  g.free_leg = -1;
  g.releasing = -1;
  g.timer = 0.0;
  g.contacts.set();
  g.q_target = stance_targets(desc, g.footholds, g.torso_target, g.q_target);
}

void start_task(const RobotDescription& desc, const GaitConfig& cfg, GaitState& g, const GaitEvents& ev)
{
  const Vec3 ex = Vec3::UnitX();
  if (cfg.feedback) {
    g.torso_target = g.initial_torso + g.torso_moves * cfg.stride * ex;
    for (int leg = 0; leg < kNumLegs; ++leg) {
      g.footholds[leg] << ev.feet[leg].x(), ev.feet[leg].y(), desc.foot_radius;
    }
  }
  g.timer = 0.0;
  const int leg = kGaitOrder[g.cursor];
  if (leg < 0) {
    g.phase = GaitPhase::MoveTorso;
    g.torso_start = g.torso_target;
    g.free_leg = -1;
    g.contacts.set();
    g.q_target = stance_targets(desc, g.footholds, g.torso_target, g.q_target);
    return;
  }
  g.phase = GaitPhase::LiftLeg;
  g.stage = LiftStage::Unload;
  g.free_leg = leg;
  g.releasing = leg;
  g.next_foothold = cfg.feedback ? Vec3(g.initial_footholds[leg] + (g.steps_taken[leg] + 1) * cfg.stride * ex)
                                 : Vec3(g.footholds[leg] + cfg.stride * ex);
  g.next_foothold.z() = desc.foot_radius;
  const double knee_yaw = 0.0;
  g.final_pose = leg_ik(desc, leg, g.next_foothold - g.torso_target, knee_yaw);
  g.intermediate = g.final_pose;
  g.intermediate.hip_pitch = raised_hip_pitch(desc, leg, g.final_pose, knee_yaw, cfg.lift_height);
  g.raised = leg_ik(desc, leg, g.footholds[leg] - g.torso_target, knee_yaw);
  g.raised.hip_pitch = raised_hip_pitch(desc, leg, g.raised, knee_yaw, cfg.lift_height);
  g.contacts.set();
  g.q_target = stance_targets(desc, g.footholds, g.torso_target, g.q_target);
}

}  // namespace

JointVector stance_targets(const RobotDescription& desc, const std::array<Vec3, kNumLegs>& footholds,
                           const Vec3& torso, const JointVector& fallback)
{
  JointVector q = fallback;
  for (int leg = 0; leg < kNumLegs; ++leg) set_leg(q, leg, leg_ik(desc, leg, footholds[leg] - torso), 0.0);
  return q;
}

GaitState gait_init(const RobotDescription& desc, const GaitConfig& cfg, const Vec3& torso,
                    const std::array<Vec3, kNumLegs>& footholds)
{
  if (cfg.stride <= 0.0 || cfg.lift_height <= 0.0 || cfg.touchdown_threshold <= 0.0 || cfg.cycles < 0) {
    throw std::invalid_argument("gait config: stride, lift height, threshold must be positive");
  }
  GaitState g;
  g.footholds = footholds;
  for (auto& f : g.footholds) f.z() = desc.foot_radius;
  g.initial_footholds = g.footholds;
  g.torso_target = torso;
  g.initial_torso = torso;
  g.torso_start = torso;
  enter_stand(desc, g);
  if (cfg.cycles == 0) g.phase = GaitPhase::Done;
  return g;
}

GaitState gait_step(const RobotDescription& desc, const GaitConfig& cfg, GaitState g, const GaitEvents& ev)
{
  g.timer += ev.dt;
  switch (g.phase) {
    case GaitPhase::Done:
      break;
    case GaitPhase::Stand:
      if (g.timer < cfg.settle_time) break;
      if (g.cursor == kGaitTasks) {
        g.cursor = 0;
        ++g.cycle;
        if (g.cycle >= cfg.cycles) {
          g.phase = GaitPhase::Done;
          break;
        }
      }
      start_task(desc, cfg, g, ev);
      break;
    case GaitPhase::LiftLeg: {
      const int leg = g.free_leg;
      const int pitch = joint_index(leg, JointRole::HipPitch);
      if (g.stage == LiftStage::Unload) {
        if (g.timer >= cfg.load_transfer_time) {
          g.stage = LiftStage::Raise;
          g.releasing = -1;
          g.contacts.reset(leg);
          // straight up first so the foot does not drag while swinging
          g.q_target(pitch) = g.raised.hip_pitch;
        }
      } else if (g.stage == LiftStage::Raise) {
        if (leg_error(g, ev, leg) < cfg.joint_tolerance) {
          g.stage = LiftStage::ToIntermediate;
          set_leg(g.q_target, leg, g.intermediate, 0.0);
        }
      } else if (g.stage == LiftStage::ToIntermediate) {
        if (leg_error(g, ev, leg) < cfg.joint_tolerance) {
          g.stage = LiftStage::Lowering;
          g.q_target(pitch) = g.final_pose.hip_pitch;
        }
      } else if (touchdown_detect(g.q_target(pitch), ev.q(pitch), cfg.touchdown_threshold)) {
        g.footholds[leg] = g.next_foothold;
        ++g.steps_taken[leg];
        ++g.cursor;
        enter_stand(desc, g);
      }
      break;
    }
    case GaitPhase::MoveTorso: {
      const double s = std::min(cfg.stride, g.timer * cfg.torso_speed);
      g.torso_target = g.torso_start + s * Vec3::UnitX();
      g.q_target = stance_targets(desc, g.footholds, g.torso_target, g.q_target);
      if (s >= cfg.stride && stance_error(g, ev) < cfg.joint_tolerance) {
        ++g.torso_moves;
        ++g.cursor;
        enter_stand(desc, g);
      }
      break;
    }
  }
  return g;
}

}  // namespace vecquad
