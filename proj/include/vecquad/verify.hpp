#pragma once

#include <cstdint>
#include <string>

#include "vecquad/allocation.hpp"

namespace vecquad {

// Random-pose allocation sweep: joints uniform in +-joint_range, contact
// modes cycled through flight, each three-foot stance and four feet.
struct VerifyOptions
{
  int cases = 1000;
  std::uint64_t seed = 1;
  double joint_range = 60.0 * kDegToRad;
  // random part of the flight wrench on top of gravity compensation
  double force_spread = 10.0;
  double torque_spread = 3.0;
};

struct VerifyReport
{
  int cases = 0;
  int solved = 0;
  int infeasible = 0;
  int contact_modes[6] = {};
  double max_wrench_residual = 0.0;       // QP wrench rows
  double max_equilibrium_residual = 0.0;  // QP joint rows
  double max_bound_violation = 0.0;       // inequalities and |f'| <= max thrust
  double max_realized_residual = 0.0;     // commanded rotors + contacts vs desired wrench
  double max_solve_ms = 0.0;
  double mean_solve_ms = 0.0;

  std::string to_json() const;
};

VerifyReport verify_allocation(const RobotDescription& desc, const VerifyOptions& opts);

}  // namespace vecquad
