/**
 * @file imu.hpp
 * @brief IMU sample representation, noise parameters and the initial
 * stationary calibration.
 *
 * Accelerometer readings are stored normalized by standard gravity, so a
 * sensor at rest reads |accel| ≈ 1.
 */
#pragma once

#include "imupose/error.hpp"
#include "imupose/quat.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace imupose {

inline constexpr double kStandardGravity = 9.80665;  // m/s^2

struct ImuSample {
  double t{0.0};  ///< s
  Vec3 gyro{Vec3::Zero()};   ///< rad/s, bias-contaminated
  Vec3 accel{Vec3::Zero()};  ///< g
};

/// Noise model and static-detector constants.
struct NoiseParams {
  Mat3 sigma_omega{Mat3::Identity() * 1e-5};  ///< gyro white noise, (rad/s)^2
  Mat3 sigma_g{Mat3::Identity() * 1e-5};      ///< accel white noise, g^2
  Mat3 sigma_b{Mat3::Identity() * 1e-10};     ///< bias random walk, (rad/s)^2/s
  double alpha{2.0};
  double beta{2.0};
  double gamma1{0.01};
  double gamma2{0.01};
  std::size_t window_n{50};
  /// Lower bound applied to calibrated variances when they are used as
  /// thresholds or measurement noise; a noiseless calibration is otherwise
  /// degenerate.
  double variance_floor{1e-12};

  void validate() const {
    const auto check_cov = [](const Mat3& m, const char* name) {
      if (!m.allFinite() || (m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 ||
          m.diagonal().minCoeff() < 0.0) {
        throw Error(ErrorCode::kInvalidConfig, std::string(name) + " must be symmetric PSD");
      }
    };
    check_cov(sigma_omega, "sigma_omega");
    check_cov(sigma_g, "sigma_g");
    check_cov(sigma_b, "sigma_b");
    if (!(alpha > 0.0 && beta > 0.0 && gamma1 > 0.0 && gamma2 > 0.0)) {
      throw Error(ErrorCode::kInvalidConfig, "detector constants must be positive");
    }
    if (window_n < 2) throw Error(ErrorCode::kInvalidConfig, "window_n must be >= 2");
  }
};

/// Detector window length for a given rate and window duration (s).
inline std::size_t window_samples(double rate_hz, double window_seconds) {
  return std::max<std::size_t>(2, static_cast<std::size_t>(std::lround(rate_hz * window_seconds)));
}

struct SensorCalibration {
  Mat3 sigma_omega_hat{Mat3::Zero()};
  Mat3 sigma_g_hat{Mat3::Zero()};
  Vec3 bias0{Vec3::Zero()};
  Quaternion q0{Quaternion::identity()};
  Vec3 mean_accel{kGravityInertial};
  std::size_t sample_count{0};
};

inline constexpr std::size_t kMinCalibrationSamples = 200;
inline constexpr double kMinCalibrationSeconds = 2.0;
inline constexpr double kMaxGravityDeviation = 0.05;
inline constexpr double kMaxSpikeSigmas = 10.0;

/// Level attitude whose predicted gravity A(q)^T g_I points along
/// mean_accel. Yaw is zero; an upside-down reading resolves to a rotation
/// about x.
inline Quaternion initial_attitude_from_gravity(const Vec3& mean_accel) {
  const double n = mean_accel.norm();
  if (!(n >= 0.8 && n <= 1.2)) {
    throw Error(ErrorCode::kDegenerateGravity,
                "mean accelerometer magnitude " + std::to_string(n) + " g outside [0.8, 1.2]");
  }
  const Vec3 a = mean_accel / n;
  const double roll = std::atan2(a.y(), a.z());
  const double pitch = std::atan2(-a.x(), std::hypot(a.y(), a.z()));
  return from_euler_zyx(roll, pitch, 0.0);
}

namespace detail {

inline double median_dt(std::span<const ImuSample> samples) {
  if (samples.size() < 2) return 0.0;
  std::vector<double> dts;
  dts.reserve(samples.size() - 1);
  for (std::size_t i = 1; i < samples.size(); ++i) dts.push_back(samples[i].t - samples[i - 1].t);
  auto mid = dts.begin() + static_cast<std::ptrdiff_t>(dts.size() / 2);
  std::nth_element(dts.begin(), mid, dts.end());
  return *mid;
}

/// Two-pass sample mean and unbiased covariance. The mean is accumulated
/// relative to the first sample, which makes a constant stream exact.
template <typename Get>
void mean_and_cov(std::span<const ImuSample> samples, Get get, Vec3& mean, Mat3& cov) {
  const Vec3 shift = get(samples.front());
  Vec3 acc = Vec3::Zero();
  for (const auto& s : samples) acc += get(s) - shift;
  mean = shift + acc / static_cast<double>(samples.size());
  cov.setZero();
  for (const auto& s : samples) {
    const Vec3 d = get(s) - mean;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(samples.size() - 1);
}

}  // namespace detail

/// Noise covariances, initial bias and tilt from a stream recorded with the
/// sensor at rest.
inline SensorCalibration calibrate_stationary(std::span<const ImuSample> samples) {
  if (samples.size() < kMinCalibrationSamples) {
    throw Error(ErrorCode::kTooFewSamples, "calibration needs at least " +
                                               std::to_string(kMinCalibrationSamples) + " samples, got " +
                                               std::to_string(samples.size()));
  }
  const double span_s = static_cast<double>(samples.size()) * detail::median_dt(samples);
  if (span_s < kMinCalibrationSeconds - 1e-9) {
    throw Error(ErrorCode::kTooFewSamples,
                "calibration needs at least 2 s of data, got " + std::to_string(span_s) + " s");
  }

  SensorCalibration c;
  c.sample_count = samples.size();
  detail::mean_and_cov(samples, [](const ImuSample& s) { return s.gyro; }, c.bias0, c.sigma_omega_hat);
  detail::mean_and_cov(samples, [](const ImuSample& s) { return s.accel; }, c.mean_accel, c.sigma_g_hat);

  double mean_norm = 0.0;
  for (const auto& s : samples) mean_norm += s.accel.norm();
  mean_norm /= static_cast<double>(samples.size());
  if (std::abs(mean_norm - 1.0) > kMaxGravityDeviation) {
    throw Error(ErrorCode::kNotStationary,
                "mean |accel| = " + std::to_string(mean_norm) + " g deviates from 1 g");
  }

  // motion spikes: any gyro excursion far outside the stream's own spread
  for (int axis = 0; axis < 3; ++axis) {
    const double sd = std::sqrt(c.sigma_omega_hat(axis, axis));
    for (const auto& s : samples) {
      if (std::abs(s.gyro(axis) - c.bias0(axis)) > kMaxSpikeSigmas * sd + 1e-12) {
        throw Error(ErrorCode::kNotStationary, "gyro spike during calibration window");
      }
    }
  }

  c.q0 = initial_attitude_from_gravity(c.mean_accel);
  return c;
}

}  // namespace imupose
