/**
 * @file static_detector.hpp
 * @brief Sliding-window detector deciding whether the IMU has been still
 * over the last N samples.
 *
 * The window keeps shifted running sums so that mean and covariance updates
 * are O(1) per sample; the shift is re-centred and the sums rebuilt from the
 * ring buffer every kRecomputeInterval pushes to bound round-off drift.
 */
#pragma once

#include "imupose/error.hpp"
#include "imupose/imu.hpp"
#include "imupose/quat.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

namespace imupose {

enum class VectorChannel { kGyro, kAccel };
enum class ScalarChannel { kAccelNorm };

class DetectorWindow {
 public:
  static constexpr std::uint64_t kRecomputeInterval = 10000;

  explicit DetectorWindow(std::size_t capacity) : capacity_(capacity) {
    if (capacity < 2) throw Error(ErrorCode::kInvalidArgument, "window capacity must be >= 2");
    gyro_.reserve(capacity);
    accel_.reserve(capacity);
    norm_.reserve(capacity);
  }

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return gyro_.size(); }
  bool full() const { return gyro_.size() == capacity_; }

  void push(const ImuSample& s) { push(s.gyro, s.accel); }

  void push(const Vec3& gyro, const Vec3& accel) {
    const double n = accel.norm();
    if (gyro_.empty()) {
      gyro_stats_.reset(gyro);
      accel_stats_.reset(accel);
      norm_stats_.reset(n);
    }
    if (full()) {
      gyro_stats_.remove(gyro_[head_]);
      accel_stats_.remove(accel_[head_]);
      norm_stats_.remove(norm_[head_]);
      gyro_[head_] = gyro;
      accel_[head_] = accel;
      norm_[head_] = n;
      head_ = (head_ + 1) % capacity_;
    } else {
      gyro_.push_back(gyro);
      accel_.push_back(accel);
      norm_.push_back(n);
    }
    gyro_stats_.add(gyro);
    accel_stats_.add(accel);
    norm_stats_.add(n);
    if (++pushes_ % kRecomputeInterval == 0) recompute();
  }

  Vec3 mean(VectorChannel ch) const {
    require_full();
    return stats(ch).mean(size());
  }
  double mean(ScalarChannel) const {
    require_full();
    return norm_stats_.mean(size());
  }
  Mat3 covariance(VectorChannel ch) const {
    require_full();
    return stats(ch).covariance(size());
  }
  double variance(ScalarChannel) const {
    require_full();
    return norm_stats_.variance(size());
  }

  /// Samples in arrival order, oldest first.
  std::vector<Vec3> samples(VectorChannel ch) const {
    const auto& buf = ch == VectorChannel::kGyro ? gyro_ : accel_;
    std::vector<Vec3> out;
    out.reserve(buf.size());
    for (std::size_t i = 0; i < buf.size(); ++i) out.push_back(buf[(head_ + i) % buf.size()]);
    return out;
  }

  /// Rebuild the running sums from the buffer around the current mean.
  void recompute() {
    if (gyro_.empty()) return;
    Vec3 g = Vec3::Zero(), a = Vec3::Zero();
    double nm = 0.0;
    for (std::size_t i = 0; i < gyro_.size(); ++i) {
      g += gyro_[i];
      a += accel_[i];
      nm += norm_[i];
    }
    const double inv = 1.0 / static_cast<double>(gyro_.size());
    gyro_stats_.reset(g * inv);
    accel_stats_.reset(a * inv);
    norm_stats_.reset(nm * inv);
    for (std::size_t i = 0; i < gyro_.size(); ++i) {
      gyro_stats_.add(gyro_[i]);
      accel_stats_.add(accel_[i]);
      norm_stats_.add(norm_[i]);
    }
  }

 private:
  struct VectorStats {
    Vec3 shift{Vec3::Zero()};
    Vec3 sum{Vec3::Zero()};
    Mat3 sum_sq{Mat3::Zero()};

    void reset(const Vec3& s) {
      shift = s;
      sum.setZero();
      sum_sq.setZero();
    }
    void add(const Vec3& x) {
      const Vec3 d = x - shift;
      sum += d;
      sum_sq += d * d.transpose();
    }
    void remove(const Vec3& x) {
      const Vec3 d = x - shift;
      sum -= d;
      sum_sq -= d * d.transpose();
    }
    Vec3 mean(std::size_t n) const { return shift + sum / static_cast<double>(n); }
    Mat3 covariance(std::size_t n) const {
      const double nn = static_cast<double>(n);
      Mat3 c = (sum_sq - sum * sum.transpose() / nn) / (nn - 1.0);
      return 0.5 * (c + c.transpose());
    }
  };

  struct ScalarStats {
    double shift{0.0};
    double sum{0.0};
    double sum_sq{0.0};

    void reset(double s) {
      shift = s;
      sum = 0.0;
      sum_sq = 0.0;
    }
    void add(double x) {
      const double d = x - shift;
      sum += d;
      sum_sq += d * d;
    }
    void remove(double x) {
      const double d = x - shift;
      sum -= d;
      sum_sq -= d * d;
    }
    double mean(std::size_t n) const { return shift + sum / static_cast<double>(n); }
    double variance(std::size_t n) const {
      const double nn = static_cast<double>(n);
      return (sum_sq - sum * sum / nn) / (nn - 1.0);
    }
  };

  const VectorStats& stats(VectorChannel ch) const {
    return ch == VectorChannel::kGyro ? gyro_stats_ : accel_stats_;
  }

  void require_full() const {
    if (!full()) {
      throw Error(ErrorCode::kWindowNotFull, std::to_string(size()) + " of " +
                                                 std::to_string(capacity_) + " samples");
    }
  }

  std::size_t capacity_;
  std::size_t head_{0};
  std::uint64_t pushes_{0};
  std::vector<Vec3> gyro_;
  std::vector<Vec3> accel_;
  std::vector<double> norm_;
  VectorStats gyro_stats_;
  VectorStats accel_stats_;
  ScalarStats norm_stats_;
};

inline Vec3 window_mean(const DetectorWindow& w, VectorChannel ch) { return w.mean(ch); }
inline double window_mean(const DetectorWindow& w, ScalarChannel ch) { return w.mean(ch); }
inline Mat3 window_covariance(const DetectorWindow& w, VectorChannel ch) { return w.covariance(ch); }
inline double window_covariance(const DetectorWindow& w, ScalarChannel ch) { return w.variance(ch); }

struct StaticVerdict {
  bool is_static{false};
  bool cond1{false};  ///< gyro variance within alpha * calibrated
  bool cond2{false};  ///< accel variance within beta * calibrated
  bool cond3{false};  ///< mean |accel| within gamma1 of 1 g
  bool cond4{false};  ///< variance of |accel| within gamma2
  bool window_full{false};
};

/// Evaluates the four stillness conditions. Matrix inequalities are tested
/// per axis on the diagonal.
inline StaticVerdict check_static(const DetectorWindow& window, const SensorCalibration& calib,
                                  const NoiseParams& params) {
  StaticVerdict v;
  v.window_full = window.full();
  if (!v.window_full) return v;

  const Mat3 s_gyro = window.covariance(VectorChannel::kGyro);
  const Mat3 s_accel = window.covariance(VectorChannel::kAccel);
  v.cond1 = true;
  v.cond2 = true;
  for (int i = 0; i < 3; ++i) {
    const double ref_w = std::max(calib.sigma_omega_hat(i, i), params.variance_floor);
    const double ref_g = std::max(calib.sigma_g_hat(i, i), params.variance_floor);
    v.cond1 = v.cond1 && s_gyro(i, i) <= params.alpha * ref_w;
    v.cond2 = v.cond2 && s_accel(i, i) <= params.beta * ref_g;
  }
  v.cond3 = std::abs(window.mean(ScalarChannel::kAccelNorm) - 1.0) <= params.gamma1;
  v.cond4 = window.variance(ScalarChannel::kAccelNorm) <= params.gamma2;
  v.is_static = v.cond1 && v.cond2 && v.cond3 && v.cond4;
  return v;
}

}  // namespace imupose
