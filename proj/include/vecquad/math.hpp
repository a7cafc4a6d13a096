#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>

namespace vecquad {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;

constexpr double kPi = std::numbers::pi;
constexpr double kDegToRad = kPi / 180.0;
constexpr double kRadToDeg = 180.0 / kPi;

inline Mat3 skew(const Vec3& v)
{
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

// inverse of skew(); only the antisymmetric part of m is used
inline Vec3 vee(const Mat3& m)
{
  return Vec3(0.5 * (m(2, 1) - m(1, 2)),
              0.5 * (m(0, 2) - m(2, 0)),
              0.5 * (m(1, 0) - m(0, 1)));
}

inline Mat3 rot_x(double a)
{
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << 1.0, 0.0, 0.0,
       0.0, c, -s,
       0.0, s, c;
  return m;
}

inline Mat3 rot_y(double a)
{
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << c, 0.0, s,
       0.0, 1.0, 0.0,
       -s, 0.0, c;
  return m;
}

inline Mat3 rot_z(double a)
{
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << c, -s, 0.0,
       s, c, 0.0,
       0.0, 0.0, 1.0;
  return m;
}

inline Mat3 exp_so3(const Vec3& w)
{
  const double angle = w.norm();
  if (angle < 1e-14) return Mat3::Identity() + skew(w);
  return Eigen::AngleAxisd(angle, w / angle).toRotationMatrix();
}

// nearest rotation in the Frobenius sense
inline Mat3 orthonormalize(const Mat3& r)
{
  Eigen::JacobiSVD<Mat3> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 out = svd.matrixU() * svd.matrixV().transpose();
  if (out.determinant() < 0.0) {
    Mat3 u = svd.matrixU();
    u.col(2) *= -1.0;
    out = u * svd.matrixV().transpose();
  }
  return out;
}

// wraps into (-pi, pi]
inline double wrap_angle(double a)
{
  a = std::remainder(a, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  return a;
}

// XYZ (roll, pitch, yaw) such that R = Rz(yaw) * Ry(pitch) * Rx(roll)
inline Vec3 rpy(const Mat3& r)
{
  const double pitch = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
  const double roll = std::atan2(r(2, 1), r(2, 2));
  const double yaw = std::atan2(r(1, 0), r(0, 0));
  return Vec3(roll, pitch, yaw);
}

inline Mat3 from_rpy(const Vec3& a)
{
  return rot_z(a.z()) * rot_y(a.y()) * rot_x(a.x());
}

}  // namespace vecquad
