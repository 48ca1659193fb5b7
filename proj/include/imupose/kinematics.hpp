/**
 * @file kinematics.hpp
 * @brief Upper-body kinematic chain (chest, two upper arms, two forearms)
 * driven by per-segment attitudes, and the hands-together link-length
 * calibration.
 *
 * Every joint is spherical. A segment's bone runs along its `bone axis`
 * expressed in the segment frame; with all attitudes identity the arms are
 * stretched laterally (T-pose), left along +y and right along -y. The hand
 * contact point sits at a fixed palm offset in the forearm frame beyond the
 * wrist; the palm offset is not calibrated.
 */
#pragma once

#include "imupose/error.hpp"
#include "imupose/quat.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace imupose {

enum class Segment : std::size_t { kChest = 0, kUpperArmLeft, kForearmLeft, kUpperArmRight, kForearmRight };
inline constexpr std::size_t kSegmentCount = 5;

inline constexpr std::array<Segment, kSegmentCount> kAllSegments{
    Segment::kChest, Segment::kUpperArmLeft, Segment::kForearmLeft, Segment::kUpperArmRight,
    Segment::kForearmRight};

inline const char* segment_name(Segment s) {
  switch (s) {
    case Segment::kChest: return "chest";
    case Segment::kUpperArmLeft: return "upper_arm_left";
    case Segment::kForearmLeft: return "forearm_left";
    case Segment::kUpperArmRight: return "upper_arm_right";
    case Segment::kForearmRight: return "forearm_right";
  }
  return "unknown";
}

/// Calibrated link lengths; the shoulder offset is shared by both sides.
enum class Link : std::size_t { kShoulderOffset = 0, kUpperArmLeft, kUpperArmRight, kForearmLeft, kForearmRight };
inline constexpr std::size_t kLinkCount = 5;

inline const char* link_name(Link l) {
  switch (l) {
    case Link::kShoulderOffset: return "shoulder_offset";
    case Link::kUpperArmLeft: return "upper_arm_left";
    case Link::kUpperArmRight: return "upper_arm_right";
    case Link::kForearmLeft: return "forearm_left";
    case Link::kForearmRight: return "forearm_right";
  }
  return "unknown";
}

/// Joint at the proximal end of each link.
inline const char* link_parent_joint(Link l) {
  switch (l) {
    case Link::kShoulderOffset: return "sternum";
    case Link::kUpperArmLeft: return "shoulder_left";
    case Link::kUpperArmRight: return "shoulder_right";
    case Link::kForearmLeft: return "elbow_left";
    case Link::kForearmRight: return "elbow_right";
  }
  return "unknown";
}

using LinkLengths = std::array<double, kLinkCount>;

struct BodyModel {
  LinkLengths lengths{0.18, 0.30, 0.30, 0.27, 0.27};  // m
  /// Palm contact point relative to the left wrist, left forearm frame (m).
  /// The right side uses the sagittal mirror image.
  Vec3 palm_offset_left{0.0, 0.08, -0.025};
  std::array<std::string, kSegmentCount> sensor_map{"chest", "upper_arm_left", "forearm_left",
                                                    "upper_arm_right", "forearm_right"};

  double length(Link l) const { return lengths[static_cast<std::size_t>(l)]; }
  double& length(Link l) { return lengths[static_cast<std::size_t>(l)]; }

  static Vec3 bone_axis_left() { return Vec3::UnitY(); }
  static Vec3 bone_axis_right() { return -Vec3::UnitY(); }
  Vec3 palm_offset_right() const { return {palm_offset_left.x(), -palm_offset_left.y(), palm_offset_left.z()}; }

  void validate() const {
    for (std::size_t i = 0; i < kLinkCount; ++i) {
      if (!(lengths[i] > 0.0) || !std::isfinite(lengths[i])) {
        throw Error(ErrorCode::kInvalidArgument,
                    std::string("link length ") + link_name(static_cast<Link>(i)) + " must be > 0");
      }
    }
    if (!palm_offset_left.allFinite()) throw Error(ErrorCode::kInvalidArgument, "palm offset not finite");
  }
};

struct SegmentPose {
  Quaternion q;  ///< attitude in the common inertial frame
  Vec3 origin;   ///< proximal joint position (m)
};

struct HomTransform {
  Mat3 rotation{Mat3::Identity()};
  Vec3 translation{Vec3::Zero()};

  Eigen::Matrix4d matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = rotation;
    m.topRightCorner<3, 1>() = translation;
    return m;
  }
  HomTransform operator*(const HomTransform& o) const {
    return {rotation * o.rotation, rotation * o.translation + translation};
  }
  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
};

/// Link frame from its attitude and bone vector: rotation A(q), translation
/// A(q) (length * axis).
inline HomTransform link_transform(const Quaternion& q, double length, const Vec3& axis) {
  const Mat3 r = to_rotation_matrix(q);
  return {r, r * (length * axis)};
}

using Attitudes = std::array<Quaternion, kSegmentCount>;

struct ChainPoses {
  std::array<SegmentPose, kSegmentCount> segments;
  Vec3 wrist_left;
  Vec3 wrist_right;
  Vec3 hand_left;
  Vec3 hand_right;

  const SegmentPose& operator[](Segment s) const { return segments[static_cast<std::size_t>(s)]; }
};

inline ChainPoses forward_kinematics(const BodyModel& model, const Attitudes& att) {
  const auto q = [&](Segment s) { return att[static_cast<std::size_t>(s)]; };
  ChainPoses out;
  auto set = [&](Segment s, const Vec3& origin) { out.segments[static_cast<std::size_t>(s)] = {q(s), origin}; };

  const Vec3 chest = Vec3::Zero();
  set(Segment::kChest, chest);
  const double shoulder = model.length(Link::kShoulderOffset);

  const Vec3 shoulder_l = chest + link_transform(q(Segment::kChest), shoulder, BodyModel::bone_axis_left()).translation;
  const Vec3 elbow_l = shoulder_l + link_transform(q(Segment::kUpperArmLeft), model.length(Link::kUpperArmLeft),
                                                   BodyModel::bone_axis_left()).translation;
  const HomTransform fore_l =
      link_transform(q(Segment::kForearmLeft), model.length(Link::kForearmLeft), BodyModel::bone_axis_left());
  set(Segment::kUpperArmLeft, shoulder_l);
  set(Segment::kForearmLeft, elbow_l);
  out.wrist_left = elbow_l + fore_l.translation;
  out.hand_left = out.wrist_left + fore_l.rotation * model.palm_offset_left;

  const Vec3 shoulder_r = chest + link_transform(q(Segment::kChest), shoulder, BodyModel::bone_axis_right()).translation;
  const Vec3 elbow_r = shoulder_r + link_transform(q(Segment::kUpperArmRight), model.length(Link::kUpperArmRight),
                                                   BodyModel::bone_axis_right()).translation;
  const HomTransform fore_r =
      link_transform(q(Segment::kForearmRight), model.length(Link::kForearmRight), BodyModel::bone_axis_right());
  set(Segment::kUpperArmRight, shoulder_r);
  set(Segment::kForearmRight, elbow_r);
  out.wrist_right = elbow_r + fore_r.translation;
  out.hand_right = out.wrist_right + fore_r.rotation * model.palm_offset_right();
  return out;
}

inline ChainPoses forward_kinematics(const BodyModel& model, const std::map<Segment, Quaternion>& attitudes) {
  Attitudes att;
  for (Segment s : kAllSegments) {
    const auto it = attitudes.find(s);
    if (it == attitudes.end()) {
      throw Error(ErrorCode::kMissingAttitude, std::string("no attitude for segment ") + segment_name(s));
    }
    att[static_cast<std::size_t>(s)] = it->second;
  }
  return forward_kinematics(model, att);
}

// ---------------------------------------------------------------------------
// Closed-chain link-length calibration

struct AnthropometricPriors {
  LinkLengths lengths{0.18, 0.30, 0.30, 0.27, 0.27};
  double tolerance{0.2};  ///< allowed fractional deviation from the prior

  double lower(std::size_t i) const { return lengths[i] * (1.0 - tolerance); }
  double upper(std::size_t i) const { return lengths[i] * (1.0 + tolerance); }
};

struct LinkCalibration {
  BodyModel model;
  std::vector<double> objective_history;  ///< m^2; entry 0 is the prior
  bool underexcited{false};
  bool stalled{false};
  std::size_t passes{0};
};

inline constexpr std::size_t kMinCalibrationFrames = 100;
inline constexpr double kMinRotationRange = 30.0 * kRadPerDeg;
inline constexpr double kObjectiveTolerance = 1e-10;  // m^2
inline constexpr std::size_t kMaxCalibrationPasses = 200;

/// The hand-to-hand gap is affine in the link lengths; this is its quadratic
/// objective mean |r0 + J L|^2 = L'AL + 2b'L + c.
struct HandGapQuadratic {
  Eigen::Matrix<double, 5, 5> A{Eigen::Matrix<double, 5, 5>::Zero()};
  Eigen::Matrix<double, 5, 1> b{Eigen::Matrix<double, 5, 1>::Zero()};
  double c{0.0};

  double operator()(const Eigen::Matrix<double, 5, 1>& l) const { return l.dot(A * l) + 2.0 * b.dot(l) + c; }
  Eigen::Matrix<double, 5, 1> gradient(const Eigen::Matrix<double, 5, 1>& l) const { return 2.0 * (A * l + b); }
};

inline Vec3 hand_gap(const BodyModel& model, const Attitudes& att) {
  const ChainPoses p = forward_kinematics(model, att);
  return p.hand_left - p.hand_right;
}

/// Mean squared hand-to-hand distance over a recording.
inline double hand_gap_objective(const BodyModel& model, std::span<const Attitudes> recording) {
  double sum = 0.0;
  for (const auto& frame : recording) sum += hand_gap(model, frame).squaredNorm();
  return recording.empty() ? 0.0 : sum / static_cast<double>(recording.size());
}

inline HandGapQuadratic build_hand_gap_quadratic(const BodyModel& model, std::span<const Attitudes> recording) {
  HandGapQuadratic quad;
  BodyModel probe = model;
  for (const auto& frame : recording) {
    probe.lengths.fill(0.0);
    const Vec3 r0 = hand_gap(probe, frame);
    Eigen::Matrix<double, 3, 5> j;
    for (std::size_t i = 0; i < kLinkCount; ++i) {
      probe.lengths.fill(0.0);
      probe.lengths[i] = 1.0;
      j.col(static_cast<Eigen::Index>(i)) = hand_gap(probe, frame) - r0;
    }
    quad.A += j.transpose() * j;
    quad.b += j.transpose() * r0;
    quad.c += r0.squaredNorm();
  }
  const double n = static_cast<double>(std::max<std::size_t>(recording.size(), 1));
  quad.A /= n;
  quad.b /= n;
  quad.c /= n;
  return quad;
}

/// True when at least one segment never turns by kMinRotationRange about
/// any of its axes over the recording.
inline bool is_underexcited(std::span<const Attitudes> recording) {
  if (recording.size() < kMinCalibrationFrames) return true;
  for (std::size_t s = 0; s < kSegmentCount; ++s) {
    Vec3 lo = Vec3::Constant(0.0), hi = Vec3::Constant(0.0);
    const Quaternion ref = recording.front()[s];
    for (const auto& frame : recording) {
      const Vec3 r = log_rotation(inverse(ref) * frame[s]);
      lo = lo.cwiseMin(r);
      hi = hi.cwiseMax(r);
    }
    if ((hi - lo).maxCoeff() < kMinRotationRange) return true;
  }
  return false;
}

/// Refines link lengths inside the prior box by minimizing the mean squared
/// hand-to-hand distance of a hands-together recording, starting from the
/// priors. Each pass runs an exact coordinate sweep followed by a projected
/// Newton step with successive-halving backtracking; passes stop once the
/// objective improves by less than kObjectiveTolerance.
inline LinkCalibration calibrate_link_lengths(const BodyModel& model, const AnthropometricPriors& priors,
                                              std::span<const Attitudes> recording) {
  using V5 = Eigen::Matrix<double, 5, 1>;
  if (recording.empty()) throw Error(ErrorCode::kInvalidArgument, "empty calibration recording");
  if (!(priors.tolerance >= 0.0 && priors.tolerance < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "prior tolerance must lie in [0, 1)");
  }
  model.validate();

  const HandGapQuadratic quad = build_hand_gap_quadratic(model, recording);
  V5 lo, hi, l;
  for (std::size_t i = 0; i < kLinkCount; ++i) {
    lo(static_cast<Eigen::Index>(i)) = priors.lower(i);
    hi(static_cast<Eigen::Index>(i)) = priors.upper(i);
    l(static_cast<Eigen::Index>(i)) = priors.lengths[i];
  }
  const auto project = [&](const V5& v) { return v.cwiseMax(lo).cwiseMin(hi); };

  LinkCalibration result;
  result.underexcited = is_underexcited(recording);
  double f = quad(l);
  result.objective_history.push_back(f);

  for (std::size_t pass = 0; pass < kMaxCalibrationPasses; ++pass) {
    const double f_start = f;

    for (Eigen::Index i = 0; i < 5; ++i) {
      if (quad.A(i, i) <= 0.0) continue;
      const double off = quad.A.row(i).dot(l) - quad.A(i, i) * l(i);
      V5 trial = l;
      trial(i) = std::clamp(-(quad.b(i) + off) / quad.A(i, i), lo(i), hi(i));
      const double ft = quad(trial);
      if (ft < f) {
        l = trial;
        f = ft;
      }
    }

    const V5 g = quad.gradient(l);
    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < 5; ++i) {
      const bool at_lo = l(i) <= lo(i) && g(i) > 0.0;
      const bool at_hi = l(i) >= hi(i) && g(i) < 0.0;
      if (!at_lo && !at_hi) free.push_back(i);
    }
    if (!free.empty()) {
      const auto nf = static_cast<Eigen::Index>(free.size());
      Eigen::MatrixXd a_ff(nf, nf);
      Eigen::VectorXd g_f(nf);
      for (Eigen::Index r = 0; r < nf; ++r) {
        g_f(r) = g(free[r]);
        for (Eigen::Index c = 0; c < nf; ++c) a_ff(r, c) = quad.A(free[r], free[c]);
      }
      const Eigen::VectorXd d_f = Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(2.0 * a_ff).solve(-g_f);
      V5 d = V5::Zero();
      for (Eigen::Index r = 0; r < nf; ++r) d(free[r]) = d_f(r);
      for (double step = 1.0; step > 1e-6; step *= 0.5) {
        const V5 trial = project(l + step * d);
        const double ft = quad(trial);
        if (ft < f) {
          l = trial;
          f = ft;
          break;
        }
      }
    }

    result.objective_history.push_back(f);
    result.passes = pass + 1;
    if (f_start - f <= kObjectiveTolerance) break;
  }

  // KKT check on the projected gradient
  const V5 g = quad.gradient(l);
  const V5 pg = project(l - g) - l;
  result.stalled = pg.norm() > 1e-6 && result.passes == kMaxCalibrationPasses;

  result.model = model;
  for (std::size_t i = 0; i < kLinkCount; ++i) result.model.lengths[i] = l(static_cast<Eigen::Index>(i));
  return result;
}

}  // namespace imupose
