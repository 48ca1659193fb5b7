/**
 * @file quat.hpp
 * @brief Quaternion and rotation algebra shared by the filters and the
 * kinematic chain.
 *
 * Conventions: scalar-first components [w x y z], Hamilton product, and a
 * quaternion q describes the body attitude so that A(q) maps body-frame
 * vectors into the inertial frame. Gravity in the inertial frame is
 * g_I = (0, 0, 1) in units of g, hence a level sensor at rest measures
 * A(q)^T g_I = (0, 0, 1).
 */
#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace imupose {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline const Vec3 kGravityInertial{0.0, 0.0, 1.0};

inline constexpr double kDegPerRad = 180.0 / std::numbers::pi;
inline constexpr double kRadPerDeg = std::numbers::pi / 180.0;

struct Quaternion {
  double w{1.0};
  double x{0.0};
  double y{0.0};
  double z{0.0};

  static constexpr Quaternion identity() { return {1.0, 0.0, 0.0, 0.0}; }
  static Quaternion from_scalar_vector(double s, const Vec3& v) { return {s, v.x(), v.y(), v.z()}; }

  Vec3 vec() const { return {x, y, z}; }
  Eigen::Vector4d coeffs() const { return {w, x, y, z}; }
  double squared_norm() const { return w * w + x * x + y * y + z * z; }
  double norm() const { return std::sqrt(squared_norm()); }

  Quaternion normalized() const {
    const double n = norm();
    return {w / n, x / n, y / n, z / n};
  }
  Quaternion conjugate() const { return {w, -x, -y, -z}; }
  Quaternion operator-() const { return {-w, -x, -y, -z}; }

  bool operator==(const Quaternion&) const = default;
};

inline constexpr double kUnitTolerance = 1e-6;

inline bool is_unit(const Quaternion& q, double tol = kUnitTolerance) {
  return std::abs(q.norm() - 1.0) <= tol;
}

/// Hamilton product without renormalization.
inline Quaternion hamilton(const Quaternion& p, const Quaternion& q) {
  return {p.w * q.w - p.x * q.x - p.y * q.y - p.z * q.z,
          p.w * q.x + p.x * q.w + p.y * q.z - p.z * q.y,
          p.w * q.y - p.x * q.z + p.y * q.w + p.z * q.x,
          p.w * q.z + p.x * q.y - p.y * q.x + p.z * q.w};
}

/// Hamilton product p ⊗ q. When both operands are unit the result is
/// renormalized so long products do not drift off the unit sphere.
inline Quaternion quat_mul(const Quaternion& p, const Quaternion& q) {
  const Quaternion r = hamilton(p, q);
  if (is_unit(p) && is_unit(q)) return r.normalized();
  return r;
}

inline Quaternion operator*(const Quaternion& p, const Quaternion& q) { return quat_mul(p, q); }

/// Quaternion form of a vector, [0 v]. Not a rotation.
inline Quaternion pure_quat(const Vec3& v) { return {0.0, v.x(), v.y(), v.z()}; }

inline constexpr double kSeriesThreshold = 1e-8;

/// Unit quaternion of the rotation vector v (rad): [cos(|v|/2); sin(|v|/2) v/|v|].
inline Quaternion exp_rotation(const Vec3& v) {
  const double angle = v.norm();
  if (angle < kSeriesThreshold) {
    return Quaternion::from_scalar_vector(1.0, 0.5 * v).normalized();
  }
  const double half = 0.5 * angle;
  return Quaternion::from_scalar_vector(std::cos(half), (std::sin(half) / angle) * v);
}

/// δq(a): rotation from the reference attitude to the true one.
inline Quaternion small_angle_correction(const Vec3& a) { return exp_rotation(a); }

/// Error angles above this are outside the filter's linearization regime.
inline constexpr double kSmallAngleLimit = 0.5;

/// Rotation vector of q, angle in [0, π].
inline Vec3 log_rotation(const Quaternion& q_in) {
  Quaternion q = q_in.normalized();
  if (q.w < 0.0) q = -q;
  const Vec3 v = q.vec();
  const double s = v.norm();
  if (s < kSeriesThreshold) return 2.0 * v;
  const double angle = 2.0 * std::atan2(s, q.w);
  return (angle / s) * v;
}

/// Rotation angle of p^-1 ⊗ q in [0, π].
inline double angle_between(const Quaternion& p, const Quaternion& q) {
  const Quaternion r = hamilton(p.normalized().conjugate(), q.normalized());
  return 2.0 * std::atan2(r.vec().norm(), std::abs(r.w));
}

inline Mat3 to_rotation_matrix(const Quaternion& q_in) {
  const Quaternion q = q_in.normalized();
  const double ww = q.w * q.w, xx = q.x * q.x, yy = q.y * q.y, zz = q.z * q.z;
  const double wx = q.w * q.x, wy = q.w * q.y, wz = q.w * q.z;
  const double xy = q.x * q.y, xz = q.x * q.z, yz = q.y * q.z;
  Mat3 r;
  r << ww + xx - yy - zz, 2.0 * (xy - wz), 2.0 * (xz + wy),
       2.0 * (xy + wz), ww - xx + yy - zz, 2.0 * (yz - wx),
       2.0 * (xz - wy), 2.0 * (yz + wx), ww - xx - yy + zz;
  return r;
}

/// A(q) v.
inline Vec3 rotate(const Quaternion& q, const Vec3& v) { return to_rotation_matrix(q) * v; }

/// A(q)^T v.
inline Vec3 rotate_inverse(const Quaternion& q, const Vec3& v) {
  return to_rotation_matrix(q).transpose() * v;
}

inline Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return s;
}

/// Z-Y-X intrinsic angles (rad).
struct EulerZyx {
  double roll{0.0};
  double pitch{0.0};
  double yaw{0.0};
  bool gimbal_lock{false};

  Vec3 as_vector() const { return {roll, pitch, yaw}; }
};

inline constexpr double kGimbalLockTolerance = 1e-6;

/// Yaw-pitch-roll decomposition. Near |pitch| = π/2 only roll ∓ yaw is
/// defined; yaw is then fixed to 0 and the flag set.
inline EulerZyx to_euler_zyx(const Quaternion& q_in) {
  const Quaternion q = q_in.normalized();
  const double sin_pitch = std::clamp(2.0 * (q.w * q.y - q.z * q.x), -1.0, 1.0);
  EulerZyx e;
  e.pitch = std::asin(sin_pitch);
  if (std::numbers::pi / 2.0 - std::abs(e.pitch) < kGimbalLockTolerance) {
    e.gimbal_lock = true;
    e.yaw = 0.0;
    e.roll = std::remainder(2.0 * std::atan2(q.x, q.w), 2.0 * std::numbers::pi);
    return e;
  }
  e.roll = std::atan2(2.0 * (q.w * q.x + q.y * q.z), 1.0 - 2.0 * (q.x * q.x + q.y * q.y));
  e.yaw = std::atan2(2.0 * (q.w * q.z + q.x * q.y), 1.0 - 2.0 * (q.y * q.y + q.z * q.z));
  return e;
}

inline Quaternion from_euler_zyx(double roll, double pitch, double yaw) {
  return exp_rotation(Vec3::UnitZ() * yaw) * exp_rotation(Vec3::UnitY() * pitch) *
         exp_rotation(Vec3::UnitX() * roll);
}

inline Quaternion from_axis_angle(const Vec3& axis, double angle) {
  return exp_rotation(axis.normalized() * angle);
}

/// Minimal rotation taking direction `from` onto direction `to`.
inline Quaternion from_two_vectors(const Vec3& from, const Vec3& to) {
  const Vec3 a = from.normalized();
  const Vec3 b = to.normalized();
  const double c = a.dot(b);
  if (c < -1.0 + 1e-12) {
    // antiparallel: any axis orthogonal to a
    Vec3 axis = a.cross(Vec3::UnitX());
    if (axis.norm() < 1e-6) axis = a.cross(Vec3::UnitY());
    return from_axis_angle(axis, std::numbers::pi);
  }
  return Quaternion::from_scalar_vector(1.0 + c, a.cross(b)).normalized();
}

/// Inverse of a unit quaternion.
inline Quaternion inverse(const Quaternion& q) { return q.conjugate(); }

/// Mirror through the sagittal (x-z) plane: R -> M R M with M = diag(1, -1, 1).
inline Quaternion mirror_sagittal(const Quaternion& q) { return {q.w, -q.x, q.y, -q.z}; }

}  // namespace imupose
