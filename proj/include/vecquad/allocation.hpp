#pragma once

#include <limits>
#include <string>
#include <vector>

#include "vecquad/control.hpp"
#include "vecquad/qp.hpp"
#include "vecquad/thrust.hpp"

namespace vecquad {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct AllocationWeights
{
  double rotor = 1.0;  // w1
  double joint = 0.0;  // w2
  // added to every diagonal entry so the Hessian stays positive definite
  // when a block has zero weight (contact forces, or joint torques with w2 = 0)
  double regularization = 1e-6;
};

struct AllocationBounds
{
  double max_thrust = 42.0;
  double max_joint_torque = 6.5;
  // per-component box on f'_i; a negative value means max_thrust / sqrt(3)
  double box_half_width = -1.0;
  // friction cone used for planning; 0 restricts planned contact forces to the normal
  double friction = 0.0;
  // optional cap on the planned normal force of each foot; infinite entries
  // add no row. Used to hand load over gradually when a foot lifts or lands.
  std::array<double, kNumLegs> max_normal{kInf, kInf, kInf, kInf};

  double half_width() const;
};

struct QPProblem
{
  DenseQP qp;
  ContactSet contacts{};
  std::vector<int> contact_legs;  // standing legs in variable order
  std::array<double, kNumRotors> box{};
  double max_thrust = 0.0;
  double max_joint_torque = 0.0;
  double rotor_weight = 1.0;
  double joint_weight = 0.0;
  double friction = 0.0;
  std::vector<std::string> equality_names;
  std::vector<std::string> inequality_names;

  int num_variables() const { return static_cast<int>(qp.g.size()); }
  int num_equalities() const { return static_cast<int>(qp.Aeq.rows()); }
  static constexpr int rotor_offset() { return 0; }
  static constexpr int joint_offset() { return 3 * kNumRotors; }
  static constexpr int contact_offset() { return 3 * kNumRotors + kNumJoints; }
  std::string constraint_name(int index) const;
};

// Decision vector: f'_0..f'_7 (link frames), tau_q, then f_c of every
// standing leg (world frame). The wrench rows include the contact forces:
//   sum Q_i f'_i + sum [R^T; p_c x R^T] f_c = w
// and the joint rows are the quasi-static equilibrium
//   tau + sum J_c^T R^T f_c + sum J_r^T R_L f'_i + sum J_s^T m_s R^T g = 0.
QPProblem build_qp(const RobotDescription& desc, const Vec6& wrench, const FrameSet& frames,
                   const ContactSet& contacts, const AllocationWeights& weights, const AllocationBounds& bounds);

struct AllocationSolution
{
  QPStatus status = QPStatus::NumericalFailure;
  std::string message;
  LinkForces link_forces = zero_vectors<kNumRotors>();
  JointVector joint_torques = JointVector::Zero();
  std::array<Vec3, kNumLegs> contact_forces = zero_vectors<kNumLegs>();  // world frame, zero for swing legs
  ContactSet contacts{};
  double objective = 0.0;
  int iterations = 0;
  int resolves = 0;

  bool ok() const { return status == QPStatus::Optimal; }
  Vec3 contact_force_sum() const;
};

// solves the QP, then checks |f'_i| <= max_thrust and re-solves once with the
// offending boxes shrunk when the component box admitted a larger norm
AllocationSolution solve_qp(QPProblem& problem);

// constraint residuals of a solution, for verification
struct AllocationResiduals
{
  double wrench = 0.0;       // Eq. rows 0..5, max abs
  double equilibrium = 0.0;  // joint rows, max abs
  double bounds = 0.0;       // max inequality violation, >= 0
};
AllocationResiduals allocation_residuals(const QPProblem& problem, const AllocationSolution& sol);
Eigen::VectorXd pack_solution(const QPProblem& problem, const AllocationSolution& sol);

struct AllocationRequest
{
  Vec6 wrench = Vec6::Zero();
  ContactSet contacts{};
  AllocationWeights weights;
  AllocationBounds bounds;
  // extra link-frame force added to each rotor after the QP (terrestrial
  // altitude correction); zero in flight
  LinkForces offsets = zero_vectors<kNumRotors>();
  RefineOptions refine;
  bool refine_enabled = true;
};

struct AllocationResult
{
  AllocationSolution solution;
  RotorCommands commands{};
  RefineResult refine;
  Vec6 rotor_wrench = Vec6::Zero();  // target for the rotors after offsets
  bool ok = false;
  bool clamped = false;
};

AllocationResult allocate(const RobotDescription& desc, const FrameSet& frames, const RotorCommands& previous,
                          const AllocationRequest& request, QPProblem* problem_out = nullptr);

// one-line JSON record of a problem and its solution
std::string qp_to_json(const QPProblem& problem, const AllocationSolution& sol);

}  // namespace vecquad
