#include "vecquad/verify.hpp"

#include <chrono>
#include <random>

#include "json.hpp"

namespace vecquad {

namespace {

ContactSet contact_mode(int k)
{
  ContactSet c;
  if (k == 5) c.set();
  if (k >= 1 && k <= 4) {
    c.set();
    c.reset(k - 1);
  }
  return c;
}

}  // namespace

std::string VerifyReport::to_json() const
{
  nlohmann::json j;
  j["cases"] = cases;
  j["solved"] = solved;
  j["infeasible"] = infeasible;
  j["contact_modes"] = std::vector<int>(contact_modes, contact_modes + 6);
  j["max_wrench_residual"] = max_wrench_residual;
  j["max_equilibrium_residual"] = max_equilibrium_residual;
  j["max_bound_violation"] = max_bound_violation;
  j["max_realized_residual"] = max_realized_residual;
  j["max_solve_ms"] = max_solve_ms;
  j["mean_solve_ms"] = mean_solve_ms;
  return j.dump(2);
}

VerifyReport verify_allocation(const RobotDescription& desc, const VerifyOptions& opts)
{
  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  VerifyReport rep;
  double total_ms = 0.0;

  for (int n = 0; n < opts.cases; ++n) {
    RobotState s;
    for (int j = 0; j < kNumJoints; ++j) s.joint_angles(j) = opts.joint_range * u(rng);
    s.base_orientation = from_rpy(Vec3(0.2 * u(rng), 0.2 * u(rng), kPi * u(rng)));
    const FrameSet f = forward_kinematics(desc, s);

    const int mode = n % 6;
    AllocationRequest req;
    req.contacts = contact_mode(mode);
    req.bounds.max_thrust = desc.max_thrust;
    req.bounds.max_joint_torque = desc.max_joint_torque;
    const Vec3 gravity = f.cog_orientation.transpose() * Vec3(0.0, 0.0, f.total_mass * kGravity);
    req.wrench.head<3>() = gravity;
    if (mode == 0) {
      req.wrench.head<3>() += opts.force_spread * Vec3(u(rng), u(rng), u(rng));
      req.wrench.tail<3>() = opts.torque_spread * Vec3(u(rng), u(rng), u(rng));
    } else {
      req.weights.joint = 1.0;
    }

    QPProblem problem;
    const auto t0 = std::chrono::steady_clock::now();
    const AllocationResult res = allocate(desc, f, RotorCommands{}, req, &problem);
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    total_ms += ms;
    rep.max_solve_ms = std::max(rep.max_solve_ms, ms);
    ++rep.cases;
    ++rep.contact_modes[mode];
    if (!res.ok) {
      ++rep.infeasible;
      continue;
    }
    ++rep.solved;

    const AllocationResiduals r = allocation_residuals(problem, res.solution);
    rep.max_wrench_residual = std::max(rep.max_wrench_residual, r.wrench);
    rep.max_equilibrium_residual = std::max(rep.max_equilibrium_residual, r.equilibrium);
    double bound = r.bounds;
    for (const auto& lf : res.solution.link_forces) bound = std::max(bound, lf.norm() - desc.max_thrust);
    rep.max_bound_violation = std::max(rep.max_bound_violation, bound);

    // what the rotors will actually produce, plus the planned contact wrench
    Vec6 realized = realized_wrench(desc, f, res.commands);
    const Mat3 rt = f.cog_orientation.transpose();
    for (int leg = 0; leg < kNumLegs; ++leg) {
      if (!req.contacts.test(leg)) continue;
      const Vec3 fc = rt * res.solution.contact_forces[leg];
      realized.head<3>() += fc;
      realized.tail<3>() += f.contact_point[leg].cross(fc);
    }
    rep.max_realized_residual = std::max(rep.max_realized_residual, (realized - req.wrench).cwiseAbs().maxCoeff());
  }
  rep.mean_solve_ms = rep.cases ? total_ms / rep.cases : 0.0;
  return rep;
}

}  // namespace vecquad
