#include <gtest/gtest.h>

#include <algorithm>

#include "helpers.hpp"
#include "vecquad/allocation.hpp"
#include "vecquad/scenario.hpp"

using namespace vecquad;
using vecquad::testing::Gen;

namespace {

Vec6 hover_wrench(const RobotDescription& d)
{
  Vec6 w = Vec6::Zero();
  w(2) = d.total_mass() * kGravity;
  return w;
}

AllocationWeights aerial() { return AllocationWeights{1.0, 0.0, 1e-6}; }
AllocationWeights terrestrial() { return AllocationWeights{1.0, 1.0, 1e-6}; }

int finite_caps(const AllocationBounds& b)
{
  int n = 0;
  for (double c : b.max_normal) n += std::isfinite(c);
  return n;
}

}  // namespace

TEST(Allocation, Dimensions)
{
  RobotDescription d;
  const FrameSet f = forward_kinematics(d, RobotState{});
  AllocationBounds b;
  QPProblem p = build_qp(d, hover_wrench(d), f, ContactSet{}, aerial(), b);
  EXPECT_EQ(p.num_variables(), 40);
  EXPECT_EQ(p.num_equalities(), 22);
  EXPECT_EQ(p.qp.Ain.rows(), 6 * 8 + 2 * 16);

  const RobotState stand = standing_state(d, LegPose{});
  const FrameSet fs = forward_kinematics(d, stand);
  p = build_qp(d, hover_wrench(d), fs, ContactSet("1111"), terrestrial(), b);
  EXPECT_EQ(p.num_variables(), 52);
  EXPECT_EQ(p.num_equalities(), 22);
  EXPECT_EQ(p.qp.Ain.rows(), 6 * 8 + 2 * 16 + 5 * 4);

  p = build_qp(d, hover_wrench(d), fs, ContactSet("1011"), terrestrial(), b);
  EXPECT_EQ(p.num_variables(), 49);
  EXPECT_EQ(p.contact_legs, (std::vector<int>{0, 1, 3}));

  b.max_normal[1] = 5.0;
  p = build_qp(d, hover_wrench(d), fs, ContactSet("1111"), terrestrial(), b);
  EXPECT_EQ(finite_caps(b), 1);
  EXPECT_EQ(p.qp.Ain.rows(), 6 * 8 + 2 * 16 + 5 * 4 + 1);
  EXPECT_EQ(p.qp.H.rows(), p.num_variables());
  // cost is positive definite
  EXPECT_GT(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(p.qp.H).eigenvalues().minCoeff(), 0.0);
}

TEST(Allocation, SymmetricHover)
{
  RobotDescription d;
  const FrameSet f = forward_kinematics(d, RobotState{});
  QPProblem p = build_qp(d, hover_wrench(d), f, ContactSet{}, aerial(), AllocationBounds{});
  const AllocationSolution s = solve_qp(p);
  ASSERT_TRUE(s.ok()) << s.message;
  for (int i = 0; i < kNumRotors; ++i) {
    EXPECT_LT((s.link_forces[i] - Vec3(0, 0, 18.62)).norm(), 1e-4) << "rotor " << i;
  }
  const AllocationResiduals r = allocation_residuals(p, s);
  EXPECT_LT(r.wrench, 1e-6);
  EXPECT_LT(r.equilibrium, 1e-6);
  EXPECT_LT(r.bounds, 1e-9);
}

TEST(Allocation, HoverCommands)
{
  RobotDescription d;
  const FrameSet f = forward_kinematics(d, RobotState{});
  AllocationRequest req;
  req.wrench = hover_wrench(d);
  req.weights = aerial();
  const AllocationResult a = allocate(d, f, RotorCommands{}, req);
  ASSERT_TRUE(a.ok);
  for (const auto& c : a.commands) {
    EXPECT_NEAR(c.thrust, 18.62, 1e-3);
    EXPECT_NEAR(c.phi, 0.0, 1e-3);
    EXPECT_NEAR(c.theta, 0.0, 1e-3);
  }
  EXPECT_LT((realized_wrench(d, f, a.commands) - req.wrench).norm(), 1e-6);
}

TEST(Allocation, ZeroWrenchWithoutGravityTerms)
{
  RobotDescription d;
  for (auto& l : d.links) l = LinkMass{1e-12, 0.0};
  const FrameSet f = forward_kinematics(d, RobotState{});
  QPProblem p = build_qp(d, Vec6::Zero(), f, ContactSet{}, aerial(), AllocationBounds{});
  const AllocationSolution s = solve_qp(p);
  ASSERT_TRUE(s.ok());
  EXPECT_LT(pack_solution(p, s).norm(), 1e-9);
  EXPECT_LT(std::abs(s.objective), 1e-18);
}

TEST(Allocation, PitchedLegStillRealizesWrench)
{
  RobotDescription d;
  RobotState st;
  st.joint_angles(joint_index(1, JointRole::HipPitch)) = 45 * kDegToRad;
  st.joint_angles(joint_index(1, JointRole::KneePitch)) = 45 * kDegToRad;
  const FrameSet f = forward_kinematics(d, st);
  AllocationRequest req;
  req.wrench = hover_wrench(d);
  req.weights = aerial();
  const AllocationResult a = allocate(d, f, RotorCommands{}, req);
  ASSERT_TRUE(a.ok);
  EXPECT_TRUE(a.refine.converged);
  EXPECT_LT((realized_wrench(d, f, a.commands) - req.wrench).norm(), 1e-6);
  for (const auto& c : a.commands) {
    EXPECT_GT(c.thrust, 0.0);
    EXPECT_LT(c.thrust, d.max_thrust);
  }
}

TEST(Allocation, BeyondEnvelopeIsInfeasible)
{
  RobotDescription d;
  const FrameSet f = forward_kinematics(d, RobotState{});
  AllocationRequest req;
  req.wrench = 10.0 * hover_wrench(d);
  req.weights = aerial();
  QPProblem p;
  const AllocationResult a = allocate(d, f, RotorCommands{}, req, &p);
  EXPECT_FALSE(a.ok);
  EXPECT_EQ(a.solution.status, QPStatus::Infeasible);
  EXPECT_FALSE(a.solution.message.empty());
}

TEST(Allocation, WeightHomogeneity)
{
  RobotDescription d;
  Gen g(41);
  for (int n = 0; n < 20; ++n) {
    RobotState st;
    st.joint_angles = g.joints(0.6);
    const FrameSet f = forward_kinematics(d, st);
    Vec6 w = hover_wrench(d);
    w.head<3>() += g.vec3(10.0);
    w.tail<3>() += g.vec3(2.0);
    const double k = g.uniform(0.1, 10.0);
    AllocationWeights w1{1.0, 0.5, 1e-6}, w2{k, 0.5 * k, k * 1e-6};
    QPProblem p1 = build_qp(d, w, f, ContactSet{}, w1, AllocationBounds{});
    QPProblem p2 = build_qp(d, w, f, ContactSet{}, w2, AllocationBounds{});
    const AllocationSolution s1 = solve_qp(p1), s2 = solve_qp(p2);
    ASSERT_TRUE(s1.ok() && s2.ok());
    EXPECT_LT((pack_solution(p1, s1) - pack_solution(p2, s2)).norm(), 1e-6);
    EXPECT_NEAR(s2.objective, k * s1.objective, 1e-6 * std::max(1.0, std::abs(s2.objective)));
  }
}

TEST(Allocation, RandomPosesSatisfyConstraints)
{
  RobotDescription d;
  Gen g(42);
  for (int n = 0; n < 200; ++n) {
    RobotState st;
    st.joint_angles = g.joints(60 * kDegToRad);
    const FrameSet f = forward_kinematics(d, st);
    Vec6 w = hover_wrench(d);
    w.head<3>() += g.vec3(10.0);
    w.tail<3>() += g.vec3(3.0);
    QPProblem p = build_qp(d, w, f, ContactSet{}, aerial(), AllocationBounds{});
    const AllocationSolution s = solve_qp(p);
    ASSERT_TRUE(s.ok()) << s.message;
    const AllocationResiduals r = allocation_residuals(p, s);
    EXPECT_LT(r.wrench, 1e-6);
    EXPECT_LT(r.equilibrium, 1e-6);
    EXPECT_LT(r.bounds, 1e-9);
    for (const auto& fl : s.link_forces) EXPECT_LE(fl.norm(), d.max_thrust + 1e-9);
  }
}

TEST(Allocation, StanceCarriesWeightOnFeet)
{
  RobotDescription d;
  const RobotState st = standing_state(d, LegPose{});
  const FrameSet f = forward_kinematics(d, st);
  AllocationBounds b;
  b.max_joint_torque = 1.5;
  QPProblem p = build_qp(d, hover_wrench(d), f, ContactSet("1111"), terrestrial(), b);
  const AllocationSolution s = solve_qp(p);
  ASSERT_TRUE(s.ok()) << s.message;
  const AllocationResiduals r = allocation_residuals(p, s);
  EXPECT_LT(r.wrench, 1e-6);
  EXPECT_LT(r.equilibrium, 1e-6);
  EXPECT_LT(r.bounds, 1e-9);
  for (int leg = 0; leg < kNumLegs; ++leg) EXPECT_GE(s.contact_forces[leg].z(), -1e-9);
  EXPECT_LE(s.joint_torques.cwiseAbs().maxCoeff(), 1.5 + 1e-9);
  // thrust-minimal: the feet take a share of the weight
  EXPECT_GT(s.contact_force_sum().z(), 0.0);
}

TEST(Allocation, NormalCapLimitsFoot)
{
  RobotDescription d;
  const RobotState st = standing_state(d, LegPose{});
  const FrameSet f = forward_kinematics(d, st);
  AllocationBounds b;
  b.max_joint_torque = 1.5;
  QPProblem p0 = build_qp(d, hover_wrench(d), f, ContactSet("1111"), terrestrial(), b);
  const AllocationSolution free_sol = solve_qp(p0);
  ASSERT_TRUE(free_sol.ok());
  const double cap = 0.25 * free_sol.contact_forces[0].z();
  b.max_normal[0] = cap;
  QPProblem p1 = build_qp(d, hover_wrench(d), f, ContactSet("1111"), terrestrial(), b);
  const AllocationSolution capped = solve_qp(p1);
  ASSERT_TRUE(capped.ok());
  EXPECT_LE(capped.contact_forces[0].z(), cap + 1e-9);
  EXPECT_EQ(std::count_if(p1.inequality_names.begin(), p1.inequality_names.end(),
                          [](const std::string& n) { return n.find("normal_upper") != std::string::npos; }),
            1);
  b.max_normal[0] = 0.0;
  QPProblem p2 = build_qp(d, hover_wrench(d), f, ContactSet("1111"), terrestrial(), b);
  const AllocationSolution unloaded = solve_qp(p2);
  ASSERT_TRUE(unloaded.ok());
  EXPECT_LT(unloaded.contact_forces[0].norm(), 1e-9);
}

TEST(Allocation, QpJsonIsOneLine)
{
  RobotDescription d;
  const FrameSet f = forward_kinematics(d, RobotState{});
  QPProblem p = build_qp(d, hover_wrench(d), f, ContactSet{}, aerial(), AllocationBounds{});
  const AllocationSolution s = solve_qp(p);
  const std::string j = qp_to_json(p, s);
  EXPECT_EQ(j.find('\n'), std::string::npos);
  EXPECT_NE(j.find("\"status\""), std::string::npos);
}
