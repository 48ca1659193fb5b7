/**
 * @file metrics.hpp
 * @brief Attitude and hand-position error reports against ground truth.
 */
#pragma once

#include "imupose/error.hpp"
#include "imupose/io.hpp"
#include "imupose/quat.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace imupose {

struct ErrorStats {
  double mean{0.0};
  double std{0.0};
};

struct ErrorSeriesRow {
  double t{0.0};
  double roll_deg{0.0};
  double pitch_deg{0.0};
  double yaw_deg{0.0};
  double hand_mm{std::numeric_limits<double>::quiet_NaN()};
};

struct ErrorReport {
  std::array<ErrorStats, 3> angle_deg{};  ///< roll, pitch, yaw absolute error
  double drift_deg{0.0};
  std::optional<ErrorStats> hand_mm;
  std::vector<ErrorSeriesRow> series;
  Quaternion alignment{Quaternion::identity()};
};

struct EvaluationOptions {
  double align_seconds{2.0};
  double drift_window_seconds{5.0};
  /// Largest truth rotation tolerated inside the alignment window.
  double align_static_deg{1.0};
};

inline ErrorStats abs_stats(std::span<const double> values) {
  ErrorStats s;
  if (values.empty()) return s;
  for (double v : values) s.mean += std::abs(v);
  s.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (std::abs(v) - s.mean) * (std::abs(v) - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

/// Sign-aligned chordal mean of unit quaternions.
inline Quaternion average_quaternion(std::span<const Quaternion> qs) {
  if (qs.empty()) throw Error(ErrorCode::kInvalidArgument, "cannot average zero quaternions");
  Eigen::Vector4d acc = Eigen::Vector4d::Zero();
  const Eigen::Vector4d ref = qs.front().coeffs();
  for (const auto& q : qs) {
    const Eigen::Vector4d c = q.coeffs();
    acc += c.dot(ref) < 0.0 ? Eigen::Vector4d(-c) : c;
  }
  return Quaternion{acc(0), acc(1), acc(2), acc(3)}.normalized();
}

struct MatchedPair {
  std::size_t est;
  std::size_t truth;
};

namespace detail {

inline double median_step(std::span<const double> t) {
  if (t.size() < 2) return 0.0;
  std::vector<double> d;
  d.reserve(t.size() - 1);
  for (std::size_t i = 1; i < t.size(); ++i) d.push_back(t[i] - t[i - 1]);
  auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  return *mid;
}

inline std::size_t nearest(std::span<const double> t, double x) {
  auto it = std::lower_bound(t.begin(), t.end(), x);
  if (it == t.end()) return t.size() - 1;
  const auto i = static_cast<std::size_t>(it - t.begin());
  if (i > 0 && x - t[i - 1] <= t[i] - x) return i - 1;
  return i;
}

}  // namespace detail

/// Nearest-neighbour pairing on the coarser stream's timestamps, accepting
/// pairs closer than half of the coarser sample period.
inline std::vector<MatchedPair> match_timestamps(std::span<const double> est, std::span<const double> truth) {
  std::vector<MatchedPair> out;
  if (est.empty() || truth.empty()) return out;
  const double pe = detail::median_step(est);
  const double pt = detail::median_step(truth);
  const double tol = 0.5 * std::max(pe, pt) + 1e-9;
  const bool truth_coarse = pt >= pe;
  const auto coarse = truth_coarse ? truth : est;
  const auto fine = truth_coarse ? est : truth;
  for (std::size_t i = 0; i < coarse.size(); ++i) {
    const std::size_t j = detail::nearest(fine, coarse[i]);
    if (std::abs(fine[j] - coarse[i]) > tol) continue;
    out.push_back(truth_coarse ? MatchedPair{j, i} : MatchedPair{i, j});
  }
  return out;
}

/// Attitude errors of an estimate stream against truth. The constant frame
/// offset R_align is the mean of q_truth ⊗ q_est⁻¹ over the first
/// align_seconds; errors are Z-Y-X Euler angles of
/// q_truth⁻¹ ⊗ (R_align ⊗ q_est). Optional hand positions add a
/// position-error column.
inline ErrorReport evaluate_attitude(std::span<const double> t_est, std::span<const Quaternion> q_est,
                                     const TruthRecord& truth, const EvaluationOptions& opt = {},
                                     std::span<const Vec3> p_est = {}) {
  if (t_est.size() != q_est.size()) throw Error(ErrorCode::kInvalidArgument, "estimate time/attitude size mismatch");
  if (!p_est.empty() && p_est.size() != t_est.size()) {
    throw Error(ErrorCode::kInvalidArgument, "estimate position size mismatch");
  }
  const bool with_hand = !p_est.empty() && truth.has_position();
  const auto pairs = match_timestamps(t_est, truth.t);
  if (pairs.empty()) throw Error(ErrorCode::kNoOverlap, "no estimate sample matches a truth sample");

  const double t0 = truth.t[pairs.front().truth];
  std::vector<Quaternion> offsets;
  for (const auto& p : pairs) {
    if (truth.t[p.truth] > t0 + opt.align_seconds) break;
    if (angle_between(truth.q[p.truth], truth.q[pairs.front().truth]) > opt.align_static_deg * kRadPerDeg) {
      throw Error(ErrorCode::kAlignmentNotStatic, "truth rotates inside the alignment window");
    }
    offsets.push_back(truth.q[p.truth] * inverse(q_est[p.est]));
  }

  ErrorReport r;
  r.alignment = average_quaternion(offsets);
  r.series.reserve(pairs.size());
  std::array<std::vector<double>, 3> err;
  std::vector<double> hand;
  for (const auto& p : pairs) {
    const Quaternion q_err = inverse(truth.q[p.truth]) * (r.alignment * q_est[p.est]);
    const EulerZyx e = to_euler_zyx(q_err);
    ErrorSeriesRow row{truth.t[p.truth], e.roll * kDegPerRad, e.pitch * kDegPerRad, e.yaw * kDegPerRad};
    if (with_hand) row.hand_mm = (p_est[p.est] - truth.position[p.truth]).norm() * 1000.0;
    err[0].push_back(row.roll_deg);
    err[1].push_back(row.pitch_deg);
    err[2].push_back(row.yaw_deg);
    if (with_hand) hand.push_back(row.hand_mm);
    r.series.push_back(row);
  }
  for (int i = 0; i < 3; ++i) r.angle_deg[i] = abs_stats(err[i]);
  if (with_hand) r.hand_mm = abs_stats(hand);

  const double t_end = r.series.back().t;
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& row : r.series) {
    if (row.t >= t_end - opt.drift_window_seconds) {
      sum += row.yaw_deg;
      ++n;
    }
  }
  r.drift_deg = n ? std::abs(sum / static_cast<double>(n)) : 0.0;
  return r;
}

/// Hand-position error alone, on already shared timestamps.
inline ErrorStats hand_position_error_mm(std::span<const Vec3> estimate, std::span<const Vec3> truth) {
  if (estimate.size() != truth.size()) throw Error(ErrorCode::kInvalidArgument, "hand series size mismatch");
  std::vector<double> d;
  d.reserve(estimate.size());
  for (std::size_t i = 0; i < estimate.size(); ++i) d.push_back((estimate[i] - truth[i]).norm() * 1000.0);
  return abs_stats(d);
}

}  // namespace imupose
