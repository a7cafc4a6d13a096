#include "vecquad/thrust.hpp"

#include <cmath>

namespace vecquad {

namespace {

Vec3 local_rotor_origin(const RobotDescription& desc, double phi)
{
  return Vec3(desc.rotor_position, 0.0, 0.0) + rot_x(phi) * Vec3(0.0, 0.0, desc.vectoring_axis_offset);
}

using RotorJacobian = Eigen::Matrix<double, 6, 3>;

// wrench of one rotor and its derivative w.r.t. (thrust, phi, theta)
Vec6 rotor_wrench(const RobotDescription& desc, const FrameSet& frames, int i, const RotorCommand& c,
                  RotorJacobian* jac)
{
  const Mat3& rl = frames.link_rotation[i];
  const Mat3 rx = rot_x(c.phi);
  const Vec3 ry_z = rot_y(c.theta).col(2);
  const Vec3 dir_local = rx * ry_z;
  const Vec3 f_local = c.thrust * dir_local;
  const Vec3 arm_local = rx * Vec3(0.0, 0.0, desc.vectoring_axis_offset);

  const Vec3 f = rl * f_local;
  const Vec3 p = frames.link_origin[i] + rl * local_rotor_origin(desc, c.phi);
  Vec6 w;
  w << f, p.cross(f);
  if (jac) {
    const Vec3 ex = Vec3::UnitX();
    const Vec3 df_dl = rl * dir_local;
    const Vec3 df_dphi = rl * ex.cross(f_local);
    const Vec3 df_dtheta = rl * (rx * Vec3::UnitY().cross(ry_z)) * c.thrust;
    const Vec3 dp_dphi = rl * ex.cross(arm_local);
    jac->col(0) << df_dl, p.cross(df_dl);
    jac->col(1) << df_dphi, dp_dphi.cross(f) + p.cross(df_dphi);
    jac->col(2) << df_dtheta, p.cross(df_dtheta);
  }
  return w;
}

Vec6 total_wrench(const RobotDescription& desc, const FrameSet& frames, const RotorCommands& cmds,
                  Eigen::Matrix<double, 6, 3 * kNumRotors>* jac)
{
  Vec6 w = Vec6::Zero();
  for (int i = 0; i < kNumRotors; ++i) {
    RotorJacobian ji;
    w += rotor_wrench(desc, frames, i, cmds[i], jac ? &ji : nullptr);
    if (jac) jac->middleCols<3>(3 * i) = ji;
  }
  return w;
}

}  // namespace

Vec3 unit_vector(const FrameSet& frames, int rotor)
{
  return frames.rotor_rotation[rotor].col(2);
}

AllocationMatrix allocation_matrix(const FrameSet& frames)
{
  AllocationMatrix q;
  for (int i = 0; i < kNumRotors; ++i) {
    const Vec3 u = unit_vector(frames, i);
    q.col(i) << u, frames.rotor_position[i].cross(u);
  }
  return q;
}

Eigen::Matrix<double, 6, 3> link_wrench_map(const FrameSet& frames, int rotor)
{
  Eigen::Matrix<double, 6, 3> m;
  const Mat3& r = frames.link_rotation[rotor];
  m.topRows<3>() = r;
  m.bottomRows<3>() = skew(frames.rotor_position[rotor]) * r;
  return m;
}

Vec3 link_frame_force(const RotorCommand& cmd)
{
  const double sp = std::sin(cmd.phi), cp = std::cos(cmd.phi);
  const double st = std::sin(cmd.theta), ct = std::cos(cmd.theta);
  return cmd.thrust * Vec3(st, -sp * ct, cp * ct);
}

std::optional<RotorCommand> extract_angles(const Vec3& f, double eps)
{
  const double thrust = f.norm();
  if (!(thrust > eps)) return std::nullopt;
  RotorCommand c;
  c.thrust = thrust;
  c.phi = wrap_angle(std::atan2(-f.y(), f.z()));
  c.theta = std::atan2(f.x(), -f.y() * std::sin(c.phi) + f.z() * std::cos(c.phi));
  return c;
}

Vec6 realized_wrench(const RobotDescription& desc, const FrameSet& frames, const RotorCommands& cmds)
{
  return total_wrench(desc, frames, cmds, nullptr);
}

RefineResult refine_allocation(const RobotDescription& desc, const Vec6& wrench, const RotorCommands& initial,
                               const FrameSet& frames, const RefineOptions& opts)
{
  RefineResult out;
  out.commands = initial;
  Eigen::Matrix<double, 6, 3 * kNumRotors> jac;
  Vec6 residual = wrench - total_wrench(desc, frames, out.commands, &jac);
  out.residual = residual.norm();
  out.history.push_back(out.residual);
  out.iterations = 1;

  double damping = opts.initial_damping;
  while (out.residual > opts.tolerance && out.iterations < opts.max_iters) {
    ++out.iterations;
    // angle columns carry thrust-sized units so the step is balanced
    Eigen::Matrix<double, 3 * kNumRotors, 1> scale;
    for (int i = 0; i < kNumRotors; ++i) {
      const double s = 1.0 / std::max(out.commands[i].thrust, 1.0);
      scale.segment<3>(3 * i) << 1.0, s, s;
    }
    const Eigen::Matrix<double, 6, 3 * kNumRotors> js = jac * scale.asDiagonal();
    const Eigen::Matrix<double, 6, 6> gram = js * js.transpose() + damping * Eigen::Matrix<double, 6, 6>::Identity();
    const Vec6 y = gram.ldlt().solve(residual);
    const Eigen::Matrix<double, 3 * kNumRotors, 1> step = scale.asDiagonal() * (js.transpose() * y);

    RotorCommands trial = out.commands;
    for (int i = 0; i < kNumRotors; ++i) {
      trial[i].thrust = std::max(0.0, trial[i].thrust + step(3 * i));
      trial[i].phi = wrap_angle(trial[i].phi + step(3 * i + 1));
      trial[i].theta = wrap_angle(trial[i].theta + step(3 * i + 2));
    }
    Eigen::Matrix<double, 6, 3 * kNumRotors> trial_jac;
    const Vec6 trial_residual = wrench - total_wrench(desc, frames, trial, &trial_jac);
    if (trial_residual.norm() < out.residual) {
      out.commands = trial;
      residual = trial_residual;
      jac = trial_jac;
      out.residual = trial_residual.norm();
      out.history.push_back(out.residual);
      damping = std::max(opts.initial_damping, 0.1 * damping);
    } else {
      damping = std::max(10.0 * damping, 1e-6);
    }
  }
  out.converged = out.residual <= opts.tolerance;
  return out;
}

}  // namespace vecquad
