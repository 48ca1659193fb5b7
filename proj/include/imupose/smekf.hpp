/**
 * @file smekf.hpp
 * @brief Multiplicative extended Kalman filter with static-phase gated
 * correction (sMEKF).
 *
 * State x = [a; b] with a the error-angle vector (rad) of the true attitude
 * relative to the reference quaternion q_hat, q = q_hat ⊗ δq(a), and b the
 * gyro bias (rad/s). Prediction integrates the bias-corrected gyro into
 * q_hat and resets a to zero. The correction uses the accelerometer as a
 * gravity observation and the gyro as a direct bias observation, and is
 * only applied when the static detector reports a still sensor.
 */
#pragma once

#include "imupose/error.hpp"
#include "imupose/imu.hpp"
#include "imupose/quat.hpp"
#include "imupose/static_detector.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace imupose {

using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

inline constexpr double kMaxDt = 0.1;                   // s
inline constexpr double kMaxInnovationCondition = 1e12;

struct FilterState {
  Quaternion q_hat{Quaternion::identity()};
  Vec3 a_hat{Vec3::Zero()};
  Vec3 b_hat{Vec3::Zero()};
  Mat6 P{Mat6::Identity()};
  double t{0.0};
  /// Corrections whose error angle exceeded kSmallAngleLimit.
  std::uint64_t large_corrections{0};
};

struct FilterConfig {
  NoiseParams noise;
  Mat6 R{Mat6::Identity() * 1e-5};  ///< blockdiag(Σ_g, Σ_ω)
  Mat6 Q{Mat6::Identity() * 1e-5};  ///< blockdiag(Σ_ω, Σ_b)
  Mat6 P0{Mat6::Identity()};
  /// Initial heading standard deviation (rad). Heading is defined by the
  /// start attitude, so it is nearly certain at t0.
  double p0_heading_std{1e-3};
  bool corrections_enabled{true};
};

inline constexpr double kDefaultP0AngleStd = 0.1;     // rad, tilt
inline constexpr double kDefaultP0HeadingStd = 1e-3;  // rad
inline constexpr double kDefaultP0BiasStd = 0.01;     // rad/s

inline Mat6 block_diag(const Mat3& a, const Mat3& b) {
  Mat6 m = Mat6::Zero();
  m.topLeftCorner<3, 3>() = a;
  m.bottomRightCorner<3, 3>() = b;
  return m;
}

/// Assembles R, Q and P0 from the noise model. Calibrated variances are
/// floored at noise.variance_floor so a noiseless calibration still yields
/// a well-posed correction.
inline FilterConfig make_filter_config(const NoiseParams& noise, double p0_angle_std = kDefaultP0AngleStd,
                                       double p0_bias_std = kDefaultP0BiasStd,
                                       double p0_heading_std = kDefaultP0HeadingStd) {
  noise.validate();
  const Mat3 floor = Mat3::Identity() * noise.variance_floor;
  FilterConfig c;
  c.noise = noise;
  c.R = block_diag(noise.sigma_g + floor, noise.sigma_omega + floor);
  c.Q = block_diag(noise.sigma_omega, noise.sigma_b);
  c.P0 = block_diag(Mat3::Identity() * p0_angle_std * p0_angle_std,
                    Mat3::Identity() * p0_bias_std * p0_bias_std);
  c.p0_heading_std = p0_heading_std;
  return c;
}

/// Noise model whose Σ_ω and Σ_g are the calibrated estimates.
inline NoiseParams with_calibrated_noise(NoiseParams noise, const SensorCalibration& calib) {
  noise.sigma_omega = calib.sigma_omega_hat;
  noise.sigma_g = calib.sigma_g_hat;
  return noise;
}

inline FilterState initial_state(const SensorCalibration& calib, const FilterConfig& config, double t0,
                                 bool use_calibrated_bias) {
  FilterState s;
  s.q_hat = calib.q0;
  s.b_hat = use_calibrated_bias ? calib.bias0 : Vec3::Zero();
  s.P = config.P0;
  // replace the angle variance along the body-frame vertical by the heading variance
  const Vec3 up = rotate_inverse(s.q_hat, kGravityInertial).normalized();
  const Mat3 vertical = up * up.transpose();
  const Mat3 tilt = Mat3::Identity() - vertical;
  const Mat3 p_angle = config.P0.topLeftCorner<3, 3>();
  s.P.topLeftCorner<3, 3>() =
      tilt * p_angle * tilt + vertical * config.p0_heading_std * config.p0_heading_std;
  s.P.topRightCorner<3, 3>() = tilt * config.P0.topRightCorner<3, 3>();
  s.P.bottomLeftCorner<3, 3>() = s.P.topRightCorner<3, 3>().transpose();
  s.t = t0;
  return s;
}

/// F = I + dt [[-[ω̂]x, -I], [0, 0]].
inline Mat6 transition_jacobian(const Vec3& omega_hat, double dt) {
  Mat6 f = Mat6::Identity();
  f.topLeftCorner<3, 3>() -= dt * skew(omega_hat);
  f.topRightCorner<3, 3>() = -dt * Mat3::Identity();
  return f;
}

/// G = dt [[-I, 0], [0, I]].
inline Mat6 noise_jacobian(double dt) {
  Mat6 g = Mat6::Zero();
  g.topLeftCorner<3, 3>() = -dt * Mat3::Identity();
  g.bottomRightCorner<3, 3>() = dt * Mat3::Identity();
  return g;
}

/// H = [[[A(q̂)^T g_I]x, 0], [0, I]].
inline Mat6 measurement_jacobian(const Quaternion& q_hat) {
  Mat6 h = Mat6::Zero();
  h.topLeftCorner<3, 3>() = skew(rotate_inverse(q_hat, kGravityInertial));
  h.bottomRightCorner<3, 3>() = Mat3::Identity();
  return h;
}

/// Predicted measurement with the static assumption ω = 0.
inline Vec6 predicted_measurement(const Quaternion& q_hat, const Vec3& b_hat) {
  Vec6 h;
  h << rotate_inverse(q_hat, kGravityInertial), b_hat;
  return h;
}

inline Mat6 symmetrized(const Mat6& m) { return 0.5 * (m + m.transpose()); }

inline FilterState predict(const FilterState& state, const ImuSample& sample, const FilterConfig& config) {
  const double dt = sample.t - state.t;
  if (!(dt > 0.0)) {
    throw Error(ErrorCode::kNonMonotoneTime, "sample at t=" + std::to_string(sample.t) +
                                                 " does not follow state at t=" + std::to_string(state.t));
  }
  if (dt > kMaxDt) {
    throw Error(ErrorCode::kExcessiveDt, "dt=" + std::to_string(dt) + " s exceeds 0.1 s");
  }
  const Vec3 omega_hat = sample.gyro - state.b_hat;

  FilterState next = state;
  next.t = sample.t;
  next.q_hat = state.q_hat * exp_rotation(omega_hat * dt);
  next.a_hat.setZero();

  const Mat6 f = transition_jacobian(omega_hat, dt);
  const Mat6 g = noise_jacobian(dt);
  next.P = symmetrized(f * state.P * f.transpose() + g * config.Q * g.transpose());
  return next;
}

/// Gated correction; the caller is responsible for the stillness check.
inline FilterState correct(const FilterState& state, const ImuSample& sample, const FilterConfig& config) {
  const Mat6 h = measurement_jacobian(state.q_hat);
  const Mat6 s = h * state.P * h.transpose() + config.R;
  const Eigen::LLT<Mat6> llt(symmetrized(s));
  if (llt.info() != Eigen::Success || llt.rcond() < 1.0 / kMaxInnovationCondition) {
    throw Error(ErrorCode::kSingularInnovation, "innovation covariance is not invertible");
  }
  // K = P H^T S^-1, computed as (S^-1 H P)^T
  const Mat6 k = llt.solve(h * state.P).transpose();

  Vec6 y;
  y << sample.accel, sample.gyro;
  Vec6 x;
  x << Vec3::Zero(), state.b_hat;
  x += k * (y - predicted_measurement(state.q_hat, state.b_hat));

  FilterState next = state;
  next.a_hat = x.head<3>();
  next.b_hat = x.tail<3>();
  next.P = symmetrized(state.P * (Mat6::Identity() - h.transpose() * k.transpose()));
  if (next.a_hat.norm() > kSmallAngleLimit) ++next.large_corrections;
  next.q_hat = (state.q_hat * small_angle_correction(next.a_hat)).normalized();
  next.a_hat.setZero();
  return next;
}

/// One filter cycle: feed the detector, predict, correct when still.
inline std::pair<FilterState, StaticVerdict> step(const FilterState& state, const ImuSample& sample,
                                                  DetectorWindow& window, const SensorCalibration& calib,
                                                  const FilterConfig& config) {
  window.push(sample);
  FilterState next = predict(state, sample, config);
  const StaticVerdict verdict = check_static(window, calib, config.noise);
  if (config.corrections_enabled && verdict.is_static) next = correct(next, sample, config);
  return {next, verdict};
}

/// Stateful wrapper bundling state, detector window and configuration for
/// one sensor stream.
class Smekf {
 public:
  Smekf(const SensorCalibration& calib, const FilterConfig& config, double t0, bool use_calibrated_bias = false)
      : calib_(calib), config_(config), window_(config.noise.window_n),
        state_(initial_state(calib, config, t0, use_calibrated_bias)) {}

  /// First sample of a stream: seeds the window without propagating.
  void prime(const ImuSample& sample) { window_.push(sample); }

  const StaticVerdict& update(const ImuSample& sample) {
    auto [next, verdict] = step(state_, sample, window_, calib_, config_);
    state_ = next;
    verdict_ = verdict;
    if (verdict.is_static && config_.corrections_enabled) ++corrections_;
    return verdict_;
  }

  const FilterState& state() const { return state_; }
  const Quaternion& attitude() const { return state_.q_hat; }
  const Vec3& bias() const { return state_.b_hat; }
  const StaticVerdict& last_verdict() const { return verdict_; }
  std::uint64_t corrections() const { return corrections_; }

 private:
  SensorCalibration calib_;
  FilterConfig config_;
  DetectorWindow window_;
  FilterState state_;
  StaticVerdict verdict_;
  std::uint64_t corrections_{0};
};

inline double min_eigenvalue(const Mat6& p) {
  return Eigen::SelfAdjointEigenSolver<Mat6>(p, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

}  // namespace imupose
