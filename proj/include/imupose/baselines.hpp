/**
 * @file baselines.hpp
 * @brief IMU-only comparison filters: Mahony's nonlinear complementary
 * filter (NCF) and Madgwick's gradient-descent complementary filter (GDC).
 *
 * Both use the accelerometer as a gravity reference at every sample and
 * carry no magnetometer terms, so neither can observe heading.
 */
#pragma once

#include "imupose/error.hpp"
#include "imupose/imu.hpp"
#include "imupose/quat.hpp"

#include <Eigen/Core>

namespace imupose {

inline constexpr double kDefaultNcfKp = 1.0;
inline constexpr double kDefaultNcfKi = 0.3;
inline constexpr double kDefaultGdcBeta = 0.1;
inline constexpr double kGdcGradientFloor = 1e-12;

namespace detail {
inline void check_baseline_dt(double dt) {
  if (!(dt > 0.0)) throw Error(ErrorCode::kNonMonotoneTime, "dt must be positive");
  if (dt > 0.1) throw Error(ErrorCode::kExcessiveDt, "dt=" + std::to_string(dt) + " s exceeds 0.1 s");
}
}  // namespace detail

struct NcfState {
  Quaternion q{Quaternion::identity()};
  Vec3 bias{Vec3::Zero()};
  double kp{kDefaultNcfKp};
  double ki{kDefaultNcfKi};
};

inline NcfState ncf_step(const NcfState& state, const ImuSample& sample, double dt) {
  detail::check_baseline_dt(dt);
  NcfState next = state;
  Vec3 error = Vec3::Zero();
  const double n = sample.accel.norm();
  if (n > 0.0) error = (sample.accel / n).cross(rotate_inverse(state.q, kGravityInertial));
  next.bias = state.bias - state.ki * error * dt;
  const Vec3 omega = sample.gyro - next.bias + state.kp * error;
  next.q = (state.q * exp_rotation(omega * dt)).normalized();
  return next;
}

struct GdcState {
  Quaternion q{Quaternion::identity()};
  double beta{kDefaultGdcBeta};
};

/// Gradient of 0.5 |A(q)^T g_I - a|^2 with respect to the quaternion
/// components, in [w x y z] order.
inline Eigen::Vector4d gdc_gradient(const Quaternion& q, const Vec3& a) {
  const Eigen::Vector3d f{2.0 * (q.x * q.z - q.w * q.y) - a.x(),
                          2.0 * (q.w * q.x + q.y * q.z) - a.y(),
                          1.0 - 2.0 * (q.x * q.x + q.y * q.y) - a.z()};
  Eigen::Matrix<double, 3, 4> j;
  j << -2.0 * q.y, 2.0 * q.z, -2.0 * q.w, 2.0 * q.x,
       2.0 * q.x, 2.0 * q.w, 2.0 * q.z, 2.0 * q.y,
       0.0, -4.0 * q.x, -4.0 * q.y, 0.0;
  return j.transpose() * f;
}

inline GdcState gdc_step(const GdcState& state, const ImuSample& sample, double dt) {
  detail::check_baseline_dt(dt);
  const Quaternion& q = state.q;
  const Quaternion rate = hamilton(q, pure_quat(0.5 * sample.gyro));
  Eigen::Vector4d qdot = rate.coeffs();
  const double n = sample.accel.norm();
  if (n > 0.0) {
    const Eigen::Vector4d grad = gdc_gradient(q, sample.accel / n);
    const double gn = grad.norm();
    // a rounding-level gradient has no usable direction
    if (gn > kGdcGradientFloor) qdot -= state.beta * grad / gn;
  }
  const Eigen::Vector4d next_q = q.coeffs() + qdot * dt;
  GdcState next = state;
  next.q = Quaternion{next_q(0), next_q(1), next_q(2), next_q(3)}.normalized();
  return next;
}

/// Stream adaptors sharing the Smekf update/attitude surface.
class Ncf {
 public:
  Ncf(const Quaternion& q0, double t0, double kp = kDefaultNcfKp, double ki = kDefaultNcfKi)
      : state_{q0, Vec3::Zero(), kp, ki}, t_(t0) {}
  void prime(const ImuSample&) {}
  void update(const ImuSample& s) {
    state_ = ncf_step(state_, s, s.t - t_);
    t_ = s.t;
  }
  const Quaternion& attitude() const { return state_.q; }
  const NcfState& state() const { return state_; }

 private:
  NcfState state_;
  double t_;
};

class Gdc {
 public:
  Gdc(const Quaternion& q0, double t0, double beta = kDefaultGdcBeta) : state_{q0, beta}, t_(t0) {}
  void prime(const ImuSample&) {}
  void update(const ImuSample& s) {
    state_ = gdc_step(state_, s, s.t - t_);
    t_ = s.t;
  }
  const Quaternion& attitude() const { return state_.q; }
  const GdcState& state() const { return state_; }

 private:
  GdcState state_;
  double t_;
};

}  // namespace imupose
