#pragma once

#include <algorithm>
#include <cmath>

#include "omnijump/common.hpp"

namespace omnijump {

inline Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

inline Vec3 vee(const Mat3& m) { return Vec3(m(2, 1), m(0, 2), m(1, 0)); }

// Euler angles are stored as (roll, pitch, yaw) and composed in ZYX order:
// R = Rz(yaw) * Ry(pitch) * Rx(roll), body -> world.
inline Mat3 euler_to_rotation(const Vec3& theta) {
  const double cr = std::cos(theta.x()), sr = std::sin(theta.x());
  const double cp = std::cos(theta.y()), sp = std::sin(theta.y());
  const double cy = std::cos(theta.z()), sy = std::sin(theta.z());
  Mat3 r;
  r << cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr,
       sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr,
       -sp,     cp * sr,                cp * cr;
  return r;
}

/// Inverse of euler_to_rotation. Pitch is returned in [-pi/2, pi/2].
inline Vec3 rotation_to_euler(const Mat3& r) {
  const double sp = std::clamp(-r(2, 0), -1.0, 1.0);
  const double pitch = std::asin(sp);
  const double roll = std::atan2(r(2, 1), r(2, 2));
  const double yaw = std::atan2(r(1, 0), r(0, 0));
  return Vec3(roll, pitch, yaw);
}

inline Mat3 rot_z(double yaw) { return euler_to_rotation(Vec3(0.0, 0.0, yaw)); }

/// Rodrigues formula, with a Taylor branch for tiny angles.
inline Mat3 so3_exp(const Vec3& w) {
  const double angle = w.norm();
  const Mat3 k = skew(w);
  double a, b;
  if (angle < 1e-6) {
    const double a2 = angle * angle;
    a = 1.0 - a2 / 6.0 + a2 * a2 / 120.0;
    b = 0.5 - a2 / 24.0 + a2 * a2 / 720.0;
  } else {
    a = std::sin(angle) / angle;
    b = (1.0 - std::cos(angle)) / (angle * angle);
  }
  return Mat3::Identity() + a * k + b * k * k;
}

/// Axis-angle vector of a rotation matrix, norm in [0, pi].
inline Vec3 so3_log(const Mat3& r) {
  const double cos_angle = std::clamp(0.5 * (r.trace() - 1.0), -1.0, 1.0);
  const double angle = std::acos(cos_angle);
  const Vec3 asym = vee(r - r.transpose());  // = 2 sin(angle) * axis
  if (angle < 1e-6) {
    // sin(angle)/angle ~ 1 - angle^2/6
    return 0.5 * asym * (1.0 + angle * angle / 6.0);
  }
  if (angle < M_PI - 1e-3) {
    return asym * (angle / (2.0 * std::sin(angle)));
  }
  // Near pi: R ~ 2 a a^T - I. Take the axis from the dominant diagonal entry of
  // the symmetric part, then fix its sign from the antisymmetric part.
  const Mat3 b = 0.5 * (r + r.transpose()) - cos_angle * Mat3::Identity();
  Eigen::Index k = 0;
  b.diagonal().maxCoeff(&k);
  Vec3 axis = b.col(k) / std::sqrt(std::max(b(k, k), 1e-300));
  axis.normalize();
  if (axis.dot(asym) < 0.0) axis = -axis;
  return axis * angle;
}

/// Projects a near-rotation back onto SO(3).
inline Mat3 orthonormalize(const Mat3& r) {
  Eigen::JacobiSVD<Mat3> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 out = svd.matrixU() * svd.matrixV().transpose();
  if (out.determinant() < 0.0) {
    Mat3 u = svd.matrixU();
    u.col(2) *= -1.0;
    out = u * svd.matrixV().transpose();
  }
  return out;
}

}  // namespace omnijump
