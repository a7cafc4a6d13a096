#pragma once

#include <array>
#include <optional>
#include <vector>

#include "vecquad/model.hpp"

namespace vecquad {

using AllocationMatrix = Eigen::Matrix<double, 6, kNumRotors>;

struct RotorCommand
{
  double thrust = 0.0;
  double phi = 0.0;    // roll about the link rod
  double theta = 0.0;  // pitch across the rotor pair
};

using RotorCommands = std::array<RotorCommand, kNumRotors>;
using LinkForces = std::array<Vec3, kNumRotors>;

template <std::size_t N>
std::array<Vec3, N> zero_vectors()
{
  std::array<Vec3, N> a;
  a.fill(Vec3::Zero());
  return a;
}

constexpr double kDegenerateThrust = 1e-3;

// thrust direction of rotor i in {CoG}
Vec3 unit_vector(const FrameSet& frames, int rotor);
AllocationMatrix allocation_matrix(const FrameSet& frames);

// per-rotor wrench map Q_i = [I; [p_i x]] * R_{CoG,L_i} acting on f'_i
Eigen::Matrix<double, 6, 3> link_wrench_map(const FrameSet& frames, int rotor);

Vec3 link_frame_force(const RotorCommand& cmd);

// empty when |f| <= eps; the caller keeps the previous angles then
std::optional<RotorCommand> extract_angles(const Vec3& f, double eps = kDegenerateThrust);

// realized wrench in {CoG} when the rotor origins follow the commanded roll angles
Vec6 realized_wrench(const RobotDescription& desc, const FrameSet& frames, const RotorCommands& cmds);

struct RefineOptions
{
  int max_iters = 50;
  double tolerance = 1e-6;
  double initial_damping = 1e-9;
};

struct RefineResult
{
  RotorCommands commands{};
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> history;  // residual norm of every accepted iterate
};

RefineResult refine_allocation(const RobotDescription& desc, const Vec6& wrench, const RotorCommands& initial,
                               const FrameSet& frames, const RefineOptions& opts = {});

}  // namespace vecquad
