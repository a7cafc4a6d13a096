#include "vecquad/sim.hpp"

#include <cmath>
#include <sstream>

namespace vecquad {

void SimConfig::validate() const
{
  if (!(timestep > 0.0)) throw std::invalid_argument("sim config: timestep must be positive");
  if (ground_stiffness < 0.0 || ground_damping < 0.0 || tangential_damping < 0.0 || friction < 0.0) {
    throw std::invalid_argument("sim config: contact parameters must be non-negative");
  }
  if (thrust_time_constant <= 0.0 || servo_time_constant <= 0.0 || joint_time_constant <= 0.0) {
    throw std::invalid_argument("sim config: actuator time constants must be positive");
  }
  if (position_noise < 0.0 || attitude_noise < 0.0 || joint_noise < 0.0 || joint_bias < 0.0) {
    throw std::invalid_argument("sim config: noise levels must be non-negative");
  }
}

namespace {

std::string divergence_message(double time, const std::string& what)
{
  std::ostringstream os;
  os << "simulation diverged at t=" << time << " s: " << what;
  return os.str();
}

double servo(double angle, double target, double tc, double max_rate, double dt)
{
  const double rate = std::clamp(wrap_angle(target - angle) / tc, -max_rate, max_rate);
  return wrap_angle(angle + rate * dt);
}

}  // namespace

SimDivergence::SimDivergence(double time, const std::string& what)
  : std::runtime_error(divergence_message(time, what)), time_(time)
{
}

std::array<Vec3, kNumLegs> contact_forces(const FrameSet& frames, const std::array<Vec3, kNumLegs>& foot_velocity,
                                          const SimConfig& cfg)
{
  std::array<Vec3, kNumLegs> out{};
  for (int leg = 0; leg < kNumLegs; ++leg) {
    out[leg].setZero();
    const Vec3 p = frames.to_world(frames.contact_point[leg]);
    const double depth = cfg.ground_height - p.z();
    if (depth <= 0.0) continue;
    const Vec3& v = foot_velocity[leg];
    const double normal = std::max(0.0, cfg.ground_stiffness * depth - cfg.ground_damping * v.z());
    Eigen::Vector2d t = -cfg.tangential_damping * v.head<2>();
    const double cap = cfg.friction * normal;
    if (t.norm() > cap) t *= cap / t.norm();
    out[leg] << t, normal;
  }
  return out;
}

Simulator::Simulator(const RobotDescription& desc, const SimConfig& cfg, const RobotState& initial)
  : desc_(desc), cfg_(cfg), state_(initial)
{
  desc_.validate();
  cfg_.validate();
  state_.validate(desc_);
  frames_ = forward_kinematics(desc_, state_);
  cog_position_ = frames_.cog_position;
  cog_velocity_ = vecquad::cog_velocity(desc_, frames_, state_);
  for (auto& f : foot_forces_) f.setZero();
  for (auto& f : rotor_forces_) f.setZero();
  refresh();
}

void Simulator::set_cog_velocity(const Vec3& v, const Vec3& omega_body)
{
  cog_velocity_ = v;
  state_.base_angular_velocity = omega_body;
  refresh();
}

void Simulator::refresh()
{
  RobotState s = state_;
  s.base_position.setZero();
  frames_ = forward_kinematics(desc_, s);
  frames_.cog_position = cog_position_;
  state_.base_position = frames_.base_position();
  const Vec3 shape_rate = cog_jacobian(desc_, frames_) * state_.joint_velocities;
  state_.base_linear_velocity =
      cog_velocity_ - state_.base_orientation * (state_.base_angular_velocity.cross(frames_.cog_in_base) + shape_rate);
  for (int i = 0; i < kNumRotors; ++i) {
    rotor_forces_[i] = state_.base_orientation * (state_.thrust(i) * unit_vector(frames_, i));
  }
}

void Simulator::step(const Actuation& act)
{
  const double dt = cfg_.timestep;

  const double a_thrust = 1.0 - std::exp(-dt / cfg_.thrust_time_constant);
  for (int i = 0; i < kNumRotors; ++i) {
    const RotorCommand& c = act.rotors[i];
    double& l = state_.thrust(i);
    l = std::clamp(l + a_thrust * (c.thrust - l), 0.0, desc_.max_thrust);
    state_.phi(i) = servo(state_.phi(i), c.phi, cfg_.servo_time_constant, desc_.max_vectoring_speed, dt);
    state_.theta(i) = servo(state_.theta(i), c.theta, cfg_.servo_time_constant, desc_.max_vectoring_speed, dt);
  }
  for (int j = 0; j < kNumJoints; ++j) {
    const auto& lim = desc_.joint_limits[j];
    const double target = std::clamp(act.joint_targets(j), lim.lower, lim.upper);
    const double q = state_.joint_angles(j);
    const double rate = std::clamp((target - q) / cfg_.joint_time_constant, -desc_.max_joint_speed, desc_.max_joint_speed);
    state_.joint_angles(j) = std::clamp(q + rate * dt, lim.lower, lim.upper);
    state_.joint_velocities(j) = rate;
  }
  refresh();

  const Mat3 r = state_.base_orientation;
  Vec3 force = Vec3::Zero();
  Vec3 torque = act.external_torque;
  for (int i = 0; i < kNumRotors; ++i) {
    const Vec3 f = r.transpose() * rotor_forces_[i];
    force += f;
    torque += frames_.rotor_position[i].cross(f);
  }

  std::array<Vec3, kNumLegs> contact_now{}, foot_vel{};
  for (int leg = 0; leg < kNumLegs; ++leg) {
    contact_now[leg] = frames_.to_world(frames_.contact_point[leg]);
    foot_vel[leg] = have_prev_ ? Vec3((contact_now[leg] - prev_contact_[leg]) / dt) : Vec3::Zero();
  }
  prev_contact_ = contact_now;
  have_prev_ = true;
  foot_forces_ = contact_forces(frames_, foot_vel, cfg_);
  Vec3 contact_sum = Vec3::Zero();
  for (int leg = 0; leg < kNumLegs; ++leg) {
    contact_sum += foot_forces_[leg];
    torque += frames_.contact_point[leg].cross(r.transpose() * foot_forces_[leg]);
  }

  const double m = frames_.total_mass;
  const Vec3 acc = (r * force + contact_sum + act.external_force) / m - Vec3(0.0, 0.0, cfg_.gravity);
  const Vec3 v_new = cog_velocity_ + acc * dt;
  cog_position_ += 0.5 * dt * (cog_velocity_ + v_new);
  cog_velocity_ = v_new;

  // implicit midpoint on the Euler equations keeps the rotational energy
  const Mat3& inertia = frames_.inertia;
  const Eigen::LLT<Mat3> inertia_llt(inertia);
  const Vec3 w0 = state_.base_angular_velocity;
  Vec3 w1 = w0;
  Vec3 wm = w0;
  for (int it = 0; it < 6; ++it) {
    wm = 0.5 * (w0 + w1);
    w1 = w0 + dt * inertia_llt.solve(torque - wm.cross(inertia * wm));
  }
  wm = 0.5 * (w0 + w1);
  state_.base_orientation = orthonormalize(r * exp_so3(dt * wm));
  state_.base_angular_velocity = w1;
  time_ += dt;
  refresh();

  if (!cog_position_.allFinite() || !cog_velocity_.allFinite() || !state_.base_angular_velocity.allFinite() ||
      !state_.base_orientation.allFinite()) {
    throw SimDivergence(time_, "non-finite rigid-body state");
  }
  if (cog_velocity_.norm() > 1e3 || state_.base_angular_velocity.norm() > 1e3) {
    throw SimDivergence(time_, "velocity exceeds divergence bound");
  }
}

JointVector Simulator::static_joint_torques() const
{
  const Mat3 rt = state_.base_orientation.transpose();
  JointVector tau = JointVector::Zero();
  for (int i = 0; i < kNumRotors; ++i) {
    tau -= jacobian(frames_, JacobianTarget::Rotor, i).transpose() * (rt * rotor_forces_[i]);
  }
  for (int leg = 0; leg < kNumLegs; ++leg) {
    tau -= jacobian(frames_, JacobianTarget::Contact, leg).transpose() * (rt * foot_forces_[leg]);
  }
  const Vec3 g = rt * Vec3(0.0, 0.0, -cfg_.gravity);
  for (int s = 1; s < kNumSegments; ++s) {
    tau -= jacobian(frames_, JacobianTarget::Segment, s).transpose() * (desc_.segment_mass(s) * g);
  }
  return tau;
}

double Simulator::mechanical_energy() const
{
  const double m = frames_.total_mass;
  const Vec3& w = state_.base_angular_velocity;
  return 0.5 * m * cog_velocity_.squaredNorm() + 0.5 * w.dot(frames_.inertia * w) +
         m * cfg_.gravity * cog_position_.z();
}

int Simulator::contact_count() const
{
  int n = 0;
  for (const auto& f : foot_forces_) n += f.z() > 0.0 ? 1 : 0;
  return n;
}

}  // namespace vecquad
