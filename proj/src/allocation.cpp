#include "vecquad/allocation.hpp"

#include <cmath>
#include <stdexcept>

#include "json.hpp"

namespace vecquad {

double AllocationBounds::half_width() const
{
  return box_half_width < 0.0 ? max_thrust / std::sqrt(3.0) : box_half_width;
}

std::string QPProblem::constraint_name(int index) const
{
  const int m_eq = num_equalities();
  if (index < 0) return "none";
  if (index < m_eq) return equality_names[index];
  if (index - m_eq < static_cast<int>(inequality_names.size())) return inequality_names[index - m_eq];
  return "constraint" + std::to_string(index);
}

Vec3 AllocationSolution::contact_force_sum() const
{
  Vec3 s = Vec3::Zero();
  for (int leg = 0; leg < kNumLegs; ++leg) {
    if (contacts.test(leg)) s += contact_forces[leg];
  }
  return s;
}

namespace {

const char* kAxis = "xyz";

void set_box_rows(QPProblem& p)
{
  for (int i = 0; i < kNumRotors; ++i) {
    for (int a = 0; a < 3; ++a) {
      p.qp.bin(6 * i + 2 * a) = -p.box[i];
      p.qp.bin(6 * i + 2 * a + 1) = -p.box[i];
    }
  }
}

}  // namespace

QPProblem build_qp(const RobotDescription& desc, const Vec6& wrench, const FrameSet& frames,
                   const ContactSet& contacts, const AllocationWeights& weights, const AllocationBounds& bounds)
{
  const int nc = static_cast<int>(contacts.count());
  if (nc == 1 || nc == 2) {
    throw std::invalid_argument("build_qp: " + std::to_string(nc) + " standing feet; expected 0, 3 or 4");
  }
  if (!wrench.allFinite()) throw std::invalid_argument("build_qp: desired wrench is not finite");
  if (weights.rotor < 0.0 || weights.joint < 0.0 || weights.regularization <= 0.0) {
    throw std::invalid_argument("build_qp: weights must be non-negative and regularization positive");
  }

  QPProblem p;
  p.contacts = contacts;
  for (int leg = 0; leg < kNumLegs; ++leg) {
    if (contacts.test(leg)) p.contact_legs.push_back(leg);
  }
  p.max_thrust = bounds.max_thrust;
  p.max_joint_torque = bounds.max_joint_torque;
  p.rotor_weight = weights.rotor;
  p.joint_weight = weights.joint;
  p.friction = bounds.friction;
  p.box.fill(bounds.half_width());

  const int nf = 3 * kNumRotors;
  const int nv = nf + kNumJoints + 3 * nc;
  const int m_eq = 6 + kNumJoints;
  int capped = 0;
  for (int leg : p.contact_legs) {
    if (std::isfinite(bounds.max_normal[leg])) ++capped;
  }
  const int m_in = 6 * kNumRotors + 2 * kNumJoints + 5 * nc + capped;
  const int jo = QPProblem::joint_offset();
  const int co = QPProblem::contact_offset();

  auto& qp = p.qp;
  Eigen::VectorXd diag(nv);
  diag << Eigen::VectorXd::Constant(nf, 2.0 * weights.rotor), Eigen::VectorXd::Constant(kNumJoints, 2.0 * weights.joint),
      Eigen::VectorXd::Zero(3 * nc);
  qp.H = (diag.array() + weights.regularization).matrix().asDiagonal();
  qp.g = Eigen::VectorXd::Zero(nv);

  qp.Aeq = Eigen::MatrixXd::Zero(m_eq, nv);
  qp.beq = Eigen::VectorXd::Zero(m_eq);
  qp.beq.head<6>() = wrench;
  const Mat3 rt = frames.cog_orientation.transpose();
  for (int i = 0; i < kNumRotors; ++i) {
    qp.Aeq.block<6, 3>(0, 3 * i) = link_wrench_map(frames, i);
    qp.Aeq.block<kNumJoints, 3>(6, 3 * i) =
        jacobian(frames, JacobianTarget::Rotor, i).transpose() * frames.link_rotation[i];
  }
  qp.Aeq.block<kNumJoints, kNumJoints>(6, jo).setIdentity();
  for (int c = 0; c < nc; ++c) {
    const int leg = p.contact_legs[c];
    qp.Aeq.block<3, 3>(0, co + 3 * c) = rt;
    qp.Aeq.block<3, 3>(3, co + 3 * c) = skew(frames.contact_point[leg]) * rt;
    qp.Aeq.block<kNumJoints, 3>(6, co + 3 * c) = jacobian(frames, JacobianTarget::Contact, leg).transpose() * rt;
  }
  const Vec3 g_world(0.0, 0.0, -kGravity);
  JointVector gravity_torque = JointVector::Zero();
  for (int s = 1; s < kNumSegments; ++s) {
    gravity_torque += jacobian(frames, JacobianTarget::Segment, s).transpose() * (desc.segment_mass(s) * (rt * g_world));
  }
  qp.beq.tail<kNumJoints>() = -gravity_torque;

  for (const char* w : {"force_x", "force_y", "force_z", "torque_x", "torque_y", "torque_z"}) {
    p.equality_names.push_back(std::string("wrench_") + w);
  }
  for (int j = 0; j < kNumJoints; ++j) p.equality_names.push_back("equilibrium_" + joint_name(j));

  qp.Ain = Eigen::MatrixXd::Zero(m_in, nv);
  qp.bin = Eigen::VectorXd::Zero(m_in);
  int row = 0;
  for (int i = 0; i < kNumRotors; ++i) {
    for (int a = 0; a < 3; ++a) {
      qp.Ain(row, 3 * i + a) = 1.0;
      p.inequality_names.push_back("rotor" + std::to_string(i) + "_f" + kAxis[a] + "_lower");
      ++row;
      qp.Ain(row, 3 * i + a) = -1.0;
      p.inequality_names.push_back("rotor" + std::to_string(i) + "_f" + kAxis[a] + "_upper");
      ++row;
    }
  }
  set_box_rows(p);
  for (int j = 0; j < kNumJoints; ++j) {
    qp.Ain(row, jo + j) = 1.0;
    qp.bin(row) = -bounds.max_joint_torque;
    p.inequality_names.push_back("torque_lower_" + joint_name(j));
    ++row;
    qp.Ain(row, jo + j) = -1.0;
    qp.bin(row) = -bounds.max_joint_torque;
    p.inequality_names.push_back("torque_upper_" + joint_name(j));
    ++row;
  }
  for (int c = 0; c < nc; ++c) {
    const int v = co + 3 * c;
    const std::string leg = "foot" + std::to_string(p.contact_legs[c]);
    qp.Ain(row, v + 2) = 1.0;
    p.inequality_names.push_back(leg + "_unilateral");
    ++row;
    for (int a = 0; a < 2; ++a) {
      for (double sign : {-1.0, 1.0}) {
        qp.Ain(row, v + 2) = bounds.friction;
        qp.Ain(row, v + a) = sign;
        p.inequality_names.push_back(leg + "_friction_" + kAxis[a] + (sign < 0 ? "_upper" : "_lower"));
        ++row;
      }
    }
    if (std::isfinite(bounds.max_normal[p.contact_legs[c]])) {
      qp.Ain(row, v + 2) = -1.0;
      qp.bin(row) = -std::max(bounds.max_normal[p.contact_legs[c]], 0.0);
      p.inequality_names.push_back(leg + "_normal_upper");
      ++row;
    }
  }
  return p;
}

namespace {

AllocationSolution unpack(const QPProblem& p, const QPResult& r)
{
  AllocationSolution s;
  s.status = r.status;
  s.iterations = r.iterations;
  s.contacts = p.contacts;
  for (auto& f : s.contact_forces) f.setZero();
  if (r.status != QPStatus::Optimal) {
    s.message = to_string(r.status);
    if (r.violated >= 0) {
      s.message += ": " + p.constraint_name(r.violated) + " violated by " + std::to_string(r.violation);
    }
    return s;
  }
  const Eigen::VectorXd& x = r.x;
  for (int i = 0; i < kNumRotors; ++i) s.link_forces[i] = x.segment<3>(3 * i);
  s.joint_torques = x.segment<kNumJoints>(QPProblem::joint_offset());
  for (size_t c = 0; c < p.contact_legs.size(); ++c) {
    s.contact_forces[p.contact_legs[c]] = x.segment<3>(QPProblem::contact_offset() + 3 * static_cast<int>(c));
  }
  double obj = 0.0;
  for (const auto& f : s.link_forces) obj += p.rotor_weight * f.squaredNorm();
  obj += p.joint_weight * s.joint_torques.squaredNorm();
  s.objective = obj;
  return s;
}

}  // namespace

AllocationSolution solve_qp(QPProblem& problem)
{
  AllocationSolution sol = unpack(problem, solve_dense_qp(problem.qp));
  if (!sol.ok()) return sol;
  bool shrunk = false;
  for (int i = 0; i < kNumRotors; ++i) {
    const double n = sol.link_forces[i].norm();
    if (n > problem.max_thrust) {
      problem.box[i] *= problem.max_thrust / n;
      shrunk = true;
    }
  }
  if (!shrunk) return sol;
  set_box_rows(problem);
  AllocationSolution again = unpack(problem, solve_dense_qp(problem.qp));
  again.resolves = 1;
  return again;
}

Eigen::VectorXd pack_solution(const QPProblem& problem, const AllocationSolution& sol)
{
  Eigen::VectorXd x(problem.num_variables());
  for (int i = 0; i < kNumRotors; ++i) x.segment<3>(3 * i) = sol.link_forces[i];
  x.segment<kNumJoints>(QPProblem::joint_offset()) = sol.joint_torques;
  for (size_t c = 0; c < problem.contact_legs.size(); ++c) {
    x.segment<3>(QPProblem::contact_offset() + 3 * static_cast<int>(c)) = sol.contact_forces[problem.contact_legs[c]];
  }
  return x;
}

AllocationResiduals allocation_residuals(const QPProblem& problem, const AllocationSolution& sol)
{
  const Eigen::VectorXd x = pack_solution(problem, sol);
  const Eigen::VectorXd eq = problem.qp.Aeq * x - problem.qp.beq;
  const Eigen::VectorXd in = problem.qp.bin - problem.qp.Ain * x;
  AllocationResiduals r;
  r.wrench = eq.head<6>().cwiseAbs().maxCoeff();
  r.equilibrium = eq.tail(eq.size() - 6).cwiseAbs().maxCoeff();
  r.bounds = std::max(0.0, in.size() ? in.maxCoeff() : 0.0);
  return r;
}

AllocationResult allocate(const RobotDescription& desc, const FrameSet& frames, const RotorCommands& previous,
                          const AllocationRequest& request, QPProblem* problem_out)
{
  AllocationResult out;
  QPProblem problem = build_qp(desc, request.wrench, frames, request.contacts, request.weights, request.bounds);
  out.solution = solve_qp(problem);
  if (problem_out) *problem_out = problem;
  if (!out.solution.ok()) return out;

  for (int i = 0; i < kNumRotors; ++i) {
    const Vec3 f = out.solution.link_forces[i] + request.offsets[i];
    out.rotor_wrench += link_wrench_map(frames, i) * f;
    if (auto cmd = extract_angles(f)) {
      out.commands[i] = *cmd;
    } else {
      out.commands[i] = previous[i];
      out.commands[i].thrust = 0.0;
    }
  }
  if (request.refine_enabled) {
    out.refine = refine_allocation(desc, out.rotor_wrench, out.commands, frames, request.refine);
    out.commands = out.refine.commands;
  }
  for (auto& c : out.commands) {
    if (c.thrust > request.bounds.max_thrust) {
      c.thrust = request.bounds.max_thrust;
      out.clamped = true;
    }
  }
  out.ok = true;
  return out;
}

std::string qp_to_json(const QPProblem& problem, const AllocationSolution& sol)
{
  auto mat = [](const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (int r = 0; r < m.rows(); ++r) {
      std::vector<double> row(m.cols());
      for (int c = 0; c < m.cols(); ++c) row[c] = m(r, c);
      rows.push_back(row);
    }
    return rows;
  };
  auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  nlohmann::json j;
  j["H"] = mat(problem.qp.H);
  j["g"] = vec(problem.qp.g);
  j["Aeq"] = mat(problem.qp.Aeq);
  j["beq"] = vec(problem.qp.beq);
  j["Ain"] = mat(problem.qp.Ain);
  j["bin"] = vec(problem.qp.bin);
  j["status"] = to_string(sol.status);
  j["message"] = sol.message;
  j["objective"] = sol.objective;
  if (sol.ok()) j["x"] = vec(pack_solution(problem, sol));
  return j.dump();
}

}  // namespace vecquad
