#pragma once

#include <cstdint>
#include <random>

#include "vecquad/model.hpp"
#include "vecquad/thrust.hpp"

namespace vecquad::testing {

// small deterministic generators for property tests
class Gen
{
public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  int index(int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng_); }

  Vec3 vec3(double half) { return Vec3(uniform(-half, half), uniform(-half, half), uniform(-half, half)); }

  Mat3 rotation()
  {
    // uniform over SO(3) from a normalized Gaussian quaternion
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::Quaterniond q(n(rng_), n(rng_), n(rng_), n(rng_));
    return q.normalized().toRotationMatrix();
  }

  JointVector joints(double half)
  {
    JointVector q;
    for (int j = 0; j < kNumJoints; ++j) q(j) = uniform(-half, half);
    return q;
  }

  RobotState state(double joint_half)
  {
    RobotState s;
    s.base_position = vec3(1.0);
    s.base_orientation = rotation();
    s.joint_angles = joints(joint_half);
    for (int i = 0; i < kNumRotors; ++i) {
      s.phi(i) = uniform(-1.2, 1.2);
      s.theta(i) = uniform(-1.2, 1.2);
    }
    return s;
  }

  RotorCommand command(double min_thrust, double max_thrust)
  {
    return RotorCommand{uniform(min_thrust, max_thrust), uniform(-3.1, 3.1), uniform(-1.55, 1.55)};
  }

private:
  std::mt19937_64 rng_;
};

inline Vec3 column(const PointJacobian& j, int k) { return j.col(k); }

}  // namespace vecquad::testing
