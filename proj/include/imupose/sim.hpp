/**
 * @file sim.hpp
 * @brief Synthetic ground truth and IMU output generator.
 *
 * A trajectory is a sequence of phases, each compiled into motion pieces
 * with closed-form attitude and body rate:
 *   - hold:        constant attitude;
 *   - axis pulse:  q = q0 ⊗ exp(θ s(τ)), fixed axis, raised-cosine rate;
 *   - loop:        q = q0 ⊗ exp(r(s(τ))) with r tracing a closed curve
 *                  through the origin, rate ω = J_r(r) dr/dt.
 * s(τ) = τ - sin(2πτ)/(2π) has zero slope at both ends, so the body rate is
 * continuous across pieces. Sensor outputs follow
 *   gyro  = ω + b + w_ω,      accel = A(q)^T (g_I + a_I) + w_g
 * with a_I the non-gravitational acceleration in g.
 */
#pragma once

#include "imupose/error.hpp"
#include "imupose/imu.hpp"
#include "imupose/kinematics.hpp"
#include "imupose/quat.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace imupose {

enum class PhaseKind { kStatic, kRotate, kShake, kLoop };

struct Phase {
  PhaseKind kind{PhaseKind::kStatic};
  double duration{1.0};  ///< s
  /// rotate: net body-frame rotation vector (rad)
  Vec3 rotation{Vec3::Zero()};
  /// shake: peak angular rate of each random sub-pulse (rad/s)
  double rate_amplitude{0.0};
  /// rotate, shake: peak non-gravitational specific force (g)
  double specific_force{0.0};
  /// loop: body-frame plane and radius (rad) of the rotation-vector circle
  Vec3 loop_axis1{Vec3::UnitX()};
  Vec3 loop_axis2{Vec3::UnitZ()};
  double loop_amplitude{0.0};

  static Phase still(double d) { return {PhaseKind::kStatic, d}; }
  static Phase rotate(double d, const Vec3& r, double force = 0.0) {
    Phase p{PhaseKind::kRotate, d};
    p.rotation = r;
    p.specific_force = force;
    return p;
  }
  static Phase shake(double d, double rate_amp, double force = 0.5) {
    Phase p{PhaseKind::kShake, d};
    p.rate_amplitude = rate_amp;
    p.specific_force = force;
    return p;
  }
  static Phase loop(double d, const Vec3& e1, const Vec3& e2, double amp) {
    Phase p{PhaseKind::kLoop, d};
    p.loop_axis1 = e1;
    p.loop_axis2 = e2;
    p.loop_amplitude = amp;
    return p;
  }
};

struct TrajectorySpec {
  double duration{0.0};  ///< s, must equal the sum of phase durations
  double sample_rate{100.0};  ///< Hz
  std::vector<Phase> phases;
  std::uint64_t seed{0};
  Quaternion initial_attitude{Quaternion::identity()};
  double shake_pulse_seconds{0.25};
  double shake_frequency_hz{2.0};
};

/// Per-sample truth.
struct GroundTruth {
  std::vector<double> t;
  std::vector<Quaternion> q;
  std::vector<Vec3> rate;            ///< rad/s, body frame
  std::vector<Vec3> specific_force;  ///< g, body frame
  std::vector<Vec3> bias;            ///< rad/s

  std::size_t size() const { return t.size(); }
};

namespace detail {

inline double smooth_s(double tau) { return tau - std::sin(2.0 * std::numbers::pi * tau) / (2.0 * std::numbers::pi); }
inline double smooth_ds(double tau) { return 1.0 - std::cos(2.0 * std::numbers::pi * tau); }

/// SO(3) right Jacobian.
inline Mat3 right_jacobian(const Vec3& phi) {
  const double th = phi.norm();
  const Mat3 k = skew(phi);
  if (th < 1e-6) return Mat3::Identity() - 0.5 * k + k * k / 6.0;
  return Mat3::Identity() - (1.0 - std::cos(th)) / (th * th) * k + (th - std::sin(th)) / (th * th * th) * k * k;
}

inline Mat3 matrix_sqrt_psd(const Mat3& m) {
  const Eigen::SelfAdjointEigenSolver<Mat3> es(0.5 * (m + m.transpose()));
  const Vec3 ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

inline std::size_t samples_in(double seconds, double rate) {
  return static_cast<std::size_t>(std::llround(seconds * rate));
}

inline bool on_grid(double seconds, double rate) {
  const double n = seconds * rate;
  return std::abs(n - std::round(n)) < 1e-6;
}

}  // namespace detail

struct MotionPiece {
  enum class Shape { kHold, kAxisPulse, kLoop };
  Shape shape{Shape::kHold};
  double t0{0.0};
  double t1{0.0};
  Quaternion q0{Quaternion::identity()};
  Vec3 rotation{Vec3::Zero()};
  Vec3 e1{Vec3::UnitX()};
  Vec3 e2{Vec3::UnitZ()};
  double amplitude{0.0};
  // non-gravitational acceleration, inertial frame (g), enveloped over [force_t0, force_t1]
  Vec3 force_dir{Vec3::Zero()};
  double force_amp{0.0};
  double force_freq{0.0};
  double force_t0{0.0};
  double force_t1{0.0};

  double duration() const { return t1 - t0; }

  Vec3 loop_vector(double s) const {
    const double a = 2.0 * std::numbers::pi * s;
    return 0.5 * amplitude * ((1.0 - std::cos(a)) * e1 + std::sin(a) * e2);
  }

  Quaternion attitude(double t) const {
    const double tau = std::clamp((t - t0) / duration(), 0.0, 1.0);
    switch (shape) {
      case Shape::kHold: return q0;
      case Shape::kAxisPulse: return q0 * exp_rotation(rotation * detail::smooth_s(tau));
      case Shape::kLoop: return q0 * exp_rotation(loop_vector(detail::smooth_s(tau)));
    }
    return q0;
  }

  Vec3 rate(double t) const {
    if (shape == Shape::kHold || t < t0 || t > t1) return Vec3::Zero();
    const double tau = (t - t0) / duration();
    const double ds_dt = detail::smooth_ds(tau) / duration();
    if (shape == Shape::kAxisPulse) return rotation * ds_dt;
    const double s = detail::smooth_s(tau);
    const double a = 2.0 * std::numbers::pi * s;
    const Vec3 dr_ds = 0.5 * amplitude * 2.0 * std::numbers::pi * (std::sin(a) * e1 + std::cos(a) * e2);
    return detail::right_jacobian(loop_vector(s)) * dr_ds * ds_dt;
  }

  Vec3 linear_accel(double t) const {
    if (force_amp == 0.0 || t < force_t0 || t > force_t1) return Vec3::Zero();
    const double u = (t - force_t0) / (force_t1 - force_t0);
    const double env = std::pow(std::sin(std::numbers::pi * u), 2);
    return force_dir * (force_amp * env * std::sin(2.0 * std::numbers::pi * force_freq * (t - force_t0)));
  }

  Quaternion end_attitude() const { return attitude(t1); }
};

/// Continuous-time motion compiled from a TrajectorySpec.
class Motion {
 public:
  Motion() = default;
  explicit Motion(std::vector<MotionPiece> pieces) : pieces_(std::move(pieces)) {}

  const std::vector<MotionPiece>& pieces() const { return pieces_; }
  double duration() const { return pieces_.empty() ? 0.0 : pieces_.back().t1; }

  Quaternion attitude(double t) const { return piece(t).attitude(t); }
  Vec3 rate(double t) const { return piece(t).rate(t); }
  /// Non-gravitational acceleration in the inertial frame (g).
  Vec3 linear_accel(double t) const { return piece(t).linear_accel(t); }
  /// Accelerometer truth in the body frame (g).
  Vec3 specific_force(double t) const {
    return rotate_inverse(attitude(t), kGravityInertial + linear_accel(t));
  }

 private:
  const MotionPiece& piece(double t) const {
    auto it = std::upper_bound(pieces_.begin(), pieces_.end(), t,
                               [](double v, const MotionPiece& p) { return v < p.t1; });
    if (it == pieces_.end()) return pieces_.back();
    return *it;
  }

  std::vector<MotionPiece> pieces_;
};

inline void validate(const TrajectorySpec& spec) {
  const auto bad = [](const std::string& m) { throw Error(ErrorCode::kInvalidSpec, m); };
  if (!(spec.sample_rate > 0.0)) bad("sample rate must be positive");
  if (!(spec.duration > 0.0)) bad("duration must be positive");
  if (spec.phases.empty()) bad("no phases");
  double total = 0.0;
  for (const auto& p : spec.phases) {
    if (!(p.duration > 0.0)) bad("phase duration must be positive");
    if (!detail::on_grid(p.duration, spec.sample_rate)) bad("phase duration not a whole number of samples");
    if (p.kind == PhaseKind::kShake && !(p.rate_amplitude >= 0.0)) bad("negative shake amplitude");
    total += p.duration;
  }
  if (std::abs(total - spec.duration) > 1e-9) bad("phase durations do not sum to the duration");
  if (!(spec.shake_pulse_seconds > 0.0)) bad("shake pulse must be positive");
  if (!is_unit(spec.initial_attitude)) bad("initial attitude must be a unit quaternion");
}

inline Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 v;
  do {
    v = Vec3(n(rng), n(rng), n(rng));
  } while (v.norm() < 1e-9);
  return v.normalized();
}

inline Quaternion random_quaternion(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Quaternion q{n(rng), n(rng), n(rng), n(rng)};
  return q.normalized();
}

inline Motion compile(const TrajectorySpec& spec) {
  validate(spec);
  std::mt19937_64 rng(spec.seed);
  std::vector<MotionPiece> pieces;
  double t = 0.0;
  std::size_t k = 0;  // sample index at phase start, keeps boundaries exact
  Quaternion q = spec.initial_attitude.normalized();
  const auto at = [&](std::size_t idx) { return static_cast<double>(idx) / spec.sample_rate; };

  for (const auto& phase : spec.phases) {
    const std::size_t n = detail::samples_in(phase.duration, spec.sample_rate);
    const double t_end = at(k + n);
    MotionPiece base;
    base.t0 = t;
    base.t1 = t_end;
    base.q0 = q;
    switch (phase.kind) {
      case PhaseKind::kStatic:
        pieces.push_back(base);
        break;
      case PhaseKind::kRotate:
        base.shape = MotionPiece::Shape::kAxisPulse;
        base.rotation = phase.rotation;
        if (phase.specific_force > 0.0) {
          base.force_dir = random_unit(rng);
          base.force_amp = phase.specific_force;
          base.force_freq = spec.shake_frequency_hz;
          base.force_t0 = base.t0;
          base.force_t1 = base.t1;
        }
        pieces.push_back(base);
        break;
      case PhaseKind::kLoop:
        base.shape = MotionPiece::Shape::kLoop;
        base.e1 = phase.loop_axis1.normalized();
        base.e2 = phase.loop_axis2.normalized();
        base.amplitude = phase.loop_amplitude;
        pieces.push_back(base);
        break;
      case PhaseKind::kShake: {
        const std::size_t pulses = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::llround(phase.duration / spec.shake_pulse_seconds)));
        const Vec3 force_dir = random_unit(rng);
        std::size_t j = k;
        for (std::size_t p = 0; p < pulses; ++p) {
          const std::size_t len = n / pulses + (p < n % pulses ? 1 : 0);
          MotionPiece piece = base;
          piece.shape = MotionPiece::Shape::kAxisPulse;
          piece.t0 = at(j);
          piece.t1 = at(j + len);
          piece.q0 = q;
          piece.rotation = random_unit(rng) * (0.5 * phase.rate_amplitude * piece.duration());
          piece.force_dir = force_dir;
          piece.force_amp = phase.specific_force;
          piece.force_freq = spec.shake_frequency_hz;
          piece.force_t0 = base.t0;
          piece.force_t1 = t_end;
          pieces.push_back(piece);
          q = piece.end_attitude();
          j += len;
        }
        break;
      }
    }
    if (phase.kind != PhaseKind::kShake) q = pieces.back().end_attitude();
    k += n;
    t = t_end;
  }
  return Motion(std::move(pieces));
}

struct Simulation {
  GroundTruth truth;
  std::vector<ImuSample> samples;
  Motion motion;
};

namespace detail {

/// Contaminates truth with bias and white noise; advances the bias random walk.
class NoiseSource {
 public:
  NoiseSource(const NoiseParams& noise, const Vec3& bias, std::uint64_t seed)
      : gyro_(matrix_sqrt_psd(noise.sigma_omega)), accel_(matrix_sqrt_psd(noise.sigma_g)),
        walk_(matrix_sqrt_psd(noise.sigma_b)), bias_(bias), rng_(seed ^ 0x9e3779b97f4a7c15ULL) {}

  ImuSample sample(double t, const Vec3& rate, const Vec3& force) {
    ImuSample s;
    s.t = t;
    s.gyro = rate + bias_ + gyro_ * draw();
    s.accel = force + accel_ * draw();
    return s;
  }
  const Vec3& bias() const { return bias_; }
  void advance(double dt) { bias_ += walk_ * draw() * dt; }

 private:
  Vec3 draw() { return {n_(rng_), n_(rng_), n_(rng_)}; }

  Mat3 gyro_, accel_, walk_;
  Vec3 bias_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> n_{0.0, 1.0};
};

}  // namespace detail

/// Samples the trajectory at t_k = k / rate, k = 0..round(duration * rate).
inline Simulation generate(const TrajectorySpec& spec, const NoiseParams& noise, const Vec3& bias) {
  Simulation sim;
  sim.motion = compile(spec);
  const std::size_t n = detail::samples_in(spec.duration, spec.sample_rate) + 1;
  const double dt = 1.0 / spec.sample_rate;
  detail::NoiseSource source(noise, bias, spec.seed);
  auto& gt = sim.truth;
  gt.t.reserve(n);
  gt.q.reserve(n);
  gt.rate.reserve(n);
  gt.specific_force.reserve(n);
  gt.bias.reserve(n);
  sim.samples.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) * dt;
    gt.t.push_back(t);
    gt.q.push_back(sim.motion.attitude(t));
    gt.rate.push_back(sim.motion.rate(t));
    gt.specific_force.push_back(sim.motion.specific_force(t));
    gt.bias.push_back(source.bias());
    sim.samples.push_back(source.sample(t, gt.rate.back(), gt.specific_force.back()));
    source.advance(dt);
  }
  return sim;
}

// ---------------------------------------------------------------------------
// Protocol presets

/// Per-sample noise of a consumer MEMS IMU at the given rate, from noise
/// densities of 0.007 deg/s/√Hz (gyro) and 120 µg/√Hz (accel).
inline NoiseParams realistic_noise(double rate_hz) {
  const double bw = std::sqrt(rate_hz / 2.0);
  const double sg = 0.007 * kRadPerDeg * bw;
  const double sa = 120e-6 * bw;
  NoiseParams p;
  p.sigma_omega = Mat3::Identity() * sg * sg;
  p.sigma_g = Mat3::Identity() * sa * sa;
  return p;
}

inline NoiseParams zero_noise() {
  NoiseParams p;
  p.sigma_omega.setZero();
  p.sigma_g.setZero();
  p.sigma_b.setZero();
  return p;
}

inline Quaternion random_start_attitude(std::mt19937_64& rng, double max_tilt) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> yaw(-std::numbers::pi, std::numbers::pi);
  return from_euler_zyx(max_tilt * u(rng), max_tilt * u(rng), yaw(rng));
}

/// Still, then shaken and rotated, then still again.
inline TrajectorySpec drift_protocol(double rate_hz, std::uint64_t seed, double still_s = 25.0,
                                     double shake_s = 10.0, double rate_amp = 3.0, double force = 0.5) {
  std::mt19937_64 rng(seed);
  TrajectorySpec spec;
  spec.sample_rate = rate_hz;
  spec.seed = seed;
  spec.initial_attitude = random_start_attitude(rng, 15.0 * kRadPerDeg);
  spec.phases = {Phase::still(still_s), Phase::shake(shake_s, rate_amp, force), Phase::still(still_s)};
  spec.duration = 2.0 * still_s + shake_s;
  return spec;
}

/// Still 5 s, 50 s of free hand-held motion (random rotations and shakes,
/// both with translational specific force), still 5 s.
inline TrajectorySpec dynamic_protocol(double rate_hz, std::uint64_t seed, double still_s = 5.0,
                                       double motion_s = 50.0, double force = 0.3) {
  std::mt19937_64 rng(seed);
  TrajectorySpec spec;
  spec.sample_rate = rate_hz;
  spec.seed = seed;
  spec.initial_attitude = random_start_attitude(rng, 15.0 * kRadPerDeg);
  spec.phases.push_back(Phase::still(still_s));
  std::uniform_int_distribution<int> half_seconds(2, 6);  // 1 .. 3 s
  std::uniform_real_distribution<double> angle(0.5, 2.0);
  std::uniform_real_distribution<double> amp(1.0, 3.0);
  std::bernoulli_distribution shake(0.35);
  double left = motion_s;
  while (left > 1e-9) {
    double d = std::min(0.5 * half_seconds(rng), left);
    if (left - d < 1.0 - 1e-9) d = left;  // no sliver phases at the end
    if (shake(rng)) {
      spec.phases.push_back(Phase::shake(d, amp(rng), force));
    } else {
      spec.phases.push_back(Phase::rotate(d, random_unit(rng) * angle(rng), force));
    }
    left -= d;
  }
  spec.phases.push_back(Phase::still(still_s));
  spec.duration = 2.0 * still_s + motion_s;
  return spec;
}

// ---------------------------------------------------------------------------
// Multi-segment body motion

struct BodySpec {
  std::array<TrajectorySpec, kSegmentCount> segments;
};

struct BodySimulation {
  std::array<GroundTruth, kSegmentCount> truth;
  std::array<std::vector<ImuSample>, kSegmentCount> samples;
  std::array<Motion, kSegmentCount> motions;
  std::vector<double> t;
  std::vector<Vec3> hand_left;
  std::vector<Vec3> hand_right;
  /// Known start posture, one attitude per segment.
  Attitudes start_posture;
};

/// Sensor location in the segment frame: mid-bone for the limbs, on the
/// sternum surface for the chest.
inline Vec3 sensor_mount(const BodyModel& model, Segment s) {
  switch (s) {
    case Segment::kChest: return {0.1, 0.0, 0.0};
    case Segment::kUpperArmLeft: return 0.5 * model.length(Link::kUpperArmLeft) * BodyModel::bone_axis_left();
    case Segment::kForearmLeft: return 0.5 * model.length(Link::kForearmLeft) * BodyModel::bone_axis_left();
    case Segment::kUpperArmRight: return 0.5 * model.length(Link::kUpperArmRight) * BodyModel::bone_axis_right();
    case Segment::kForearmRight: return 0.5 * model.length(Link::kForearmRight) * BodyModel::bone_axis_right();
  }
  return Vec3::Zero();
}

inline Attitudes body_attitudes(const std::array<Motion, kSegmentCount>& motions, double t) {
  Attitudes a;
  for (std::size_t i = 0; i < kSegmentCount; ++i) a[i] = motions[i].attitude(t);
  return a;
}

inline Vec3 sensor_position(const BodyModel& model, const std::array<Motion, kSegmentCount>& motions, Segment s,
                            double t) {
  const Attitudes att = body_attitudes(motions, t);
  const ChainPoses poses = forward_kinematics(model, att);
  const auto& pose = poses[s];
  return pose.origin + rotate(pose.q, sensor_mount(model, s));
}

inline BodySimulation generate_body(const BodySpec& spec, const BodyModel& model, const NoiseParams& noise,
                                    const std::array<Vec3, kSegmentCount>& biases) {
  model.validate();
  const TrajectorySpec& ref = spec.segments[0];
  for (const auto& s : spec.segments) {
    if (std::abs(s.duration - ref.duration) > 1e-9 || s.sample_rate != ref.sample_rate) {
      throw Error(ErrorCode::kMisalignedSpecs, "segment specs differ in duration or sample rate");
    }
  }
  BodySimulation out;
  for (std::size_t i = 0; i < kSegmentCount; ++i) {
    out.motions[i] = compile(spec.segments[i]);
    out.start_posture[i] = spec.segments[i].initial_attitude.normalized();
  }

  const std::size_t n = detail::samples_in(ref.duration, ref.sample_rate) + 1;
  const double dt = 1.0 / ref.sample_rate;
  constexpr double h = 1e-4;  // central-difference step for sensor acceleration
  const double to_g = 1.0 / kStandardGravity;

  std::vector<detail::NoiseSource> sources;
  for (std::size_t i = 0; i < kSegmentCount; ++i) {
    sources.emplace_back(noise, biases[i], spec.segments[i].seed + 7919 * (i + 1));
  }
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) * dt;
    out.t.push_back(t);
    const ChainPoses poses = forward_kinematics(model, body_attitudes(out.motions, t));
    out.hand_left.push_back(poses.hand_left);
    out.hand_right.push_back(poses.hand_right);
    for (std::size_t i = 0; i < kSegmentCount; ++i) {
      const Segment seg = kAllSegments[i];
      const Motion& m = out.motions[i];
      const Vec3 p_minus = sensor_position(model, out.motions, seg, t - h);
      const Vec3 p0 = sensor_position(model, out.motions, seg, t);
      const Vec3 p_plus = sensor_position(model, out.motions, seg, t + h);
      const Vec3 lin_acc = (p_plus - 2.0 * p0 + p_minus) / (h * h) * to_g + m.linear_accel(t);
      const Quaternion q = m.attitude(t);
      const Vec3 rate = m.rate(t);
      const Vec3 force = rotate_inverse(q, kGravityInertial + lin_acc);
      auto& gt = out.truth[i];
      gt.t.push_back(t);
      gt.q.push_back(q);
      gt.rate.push_back(rate);
      gt.specific_force.push_back(force);
      gt.bias.push_back(sources[i].bias());
      out.samples[i].push_back(sources[i].sample(t, rate, force));
      sources[i].advance(dt);
    }
  }
  return out;
}

/// Hand-on-table start, then six loops of the right hand, each ending with
/// the hand back on the table for a short hold.
inline BodySpec circles_preset(double rate_hz, std::uint64_t seed, std::size_t loops = 6, double first_hold = 3.0,
                               double loop_s = 4.0, double hold_s = 2.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-0.1, 0.1);
  const double duration = first_hold + static_cast<double>(loops) * (loop_s + hold_s);

  const Quaternion chest = from_euler_zyx(0.0, 0.0, jitter(rng));
  const Quaternion ua_r = chest * from_two_vectors(BodyModel::bone_axis_right(), Vec3(0.15, -0.2, -1.0));
  const Quaternion fa_r = chest * from_two_vectors(BodyModel::bone_axis_right(), Vec3(1.0, 0.15, -0.1));
  const Quaternion ua_l = mirror_sagittal(ua_r);
  const Quaternion fa_l = mirror_sagittal(fa_r);
  const std::array<Quaternion, kSegmentCount> start{chest, ua_l, fa_l, ua_r, fa_r};

  BodySpec body;
  for (std::size_t i = 0; i < kSegmentCount; ++i) {
    TrajectorySpec& s = body.segments[i];
    s.sample_rate = rate_hz;
    s.seed = seed * 31 + i;
    s.duration = duration;
    s.initial_attitude = start[i];
    s.phases.push_back(Phase::still(first_hold));
    for (std::size_t l = 0; l < loops; ++l) {
      const Segment seg = kAllSegments[i];
      if (seg == Segment::kUpperArmRight) {
        s.phases.push_back(Phase::loop(loop_s, Vec3::UnitX(), Vec3::UnitZ(), 0.5 + jitter(rng)));
      } else if (seg == Segment::kForearmRight) {
        s.phases.push_back(Phase::loop(loop_s, Vec3::UnitZ(), Vec3::UnitX(), 0.6 + jitter(rng)));
      } else if (seg == Segment::kChest) {
        s.phases.push_back(Phase::loop(loop_s, Vec3::UnitZ(), Vec3::UnitY(), 0.05));
      } else {
        s.phases.push_back(Phase::still(loop_s));
      }
      s.phases.push_back(Phase::still(hold_s));
    }
  }
  return body;
}

/// Noise-free hands-together attitude frames for link-length calibration:
/// random chest attitudes and contact points in front of the chest, both
/// arms solved in closed form with random elbow swivel and forearm roll.
inline std::vector<Attitudes> hands_together_recording(const BodyModel& model, std::size_t frames,
                                                       std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> ang(-std::numbers::pi, std::numbers::pi);
  std::vector<Attitudes> out;
  out.reserve(frames);

  struct ArmSolution {
    Quaternion upper, fore;
  };
  // Places shoulder->contact with an upper arm of length lu and an effective
  // forearm vector v0 (forearm frame) ending at the palm contact point.
  const auto solve_arm = [&](const Vec3& shoulder, const Vec3& contact, double lu, const Vec3& axis,
                             const Vec3& v0, double swivel, double roll, ArmSolution& sol) {
    const double lf = v0.norm();
    const Vec3 d = contact - shoulder;
    const double dist = d.norm();
    if (dist >= lu + lf - 1e-3 || dist <= std::abs(lu - lf) + 1e-3) return false;
    const Vec3 n = d / dist;
    const double along = (lu * lu - lf * lf + dist * dist) / (2.0 * dist);
    const double radius = std::sqrt(std::max(0.0, lu * lu - along * along));
    Vec3 perp = n.cross(Vec3::UnitZ());
    if (perp.norm() < 1e-6) perp = n.cross(Vec3::UnitX());
    perp.normalize();
    const Vec3 perp2 = n.cross(perp);
    const Vec3 elbow = shoulder + along * n + radius * (std::cos(swivel) * perp + std::sin(swivel) * perp2);
    const Vec3 upper_dir = (elbow - shoulder).normalized();
    sol.upper = from_axis_angle(upper_dir, roll) * from_two_vectors(axis, upper_dir);
    const Vec3 fore_vec = contact - elbow;
    sol.fore = from_axis_angle(fore_vec, -roll) * from_two_vectors(v0, fore_vec);
    return true;
  };

  const double sh = model.length(Link::kShoulderOffset);
  const Vec3 v0_left = model.length(Link::kForearmLeft) * BodyModel::bone_axis_left() + model.palm_offset_left;
  const Vec3 v0_right = model.length(Link::kForearmRight) * BodyModel::bone_axis_right() + model.palm_offset_right();
  while (out.size() < frames) {
    const Quaternion chest = from_euler_zyx(0.3 * u(rng), 0.3 * u(rng), 0.6 * u(rng));
    const Vec3 local_contact(0.35 + 0.15 * u(rng), 0.15 * u(rng), -0.1 + 0.25 * u(rng));
    const Vec3 contact = rotate(chest, local_contact);
    const Vec3 shoulder_l = rotate(chest, sh * BodyModel::bone_axis_left());
    const Vec3 shoulder_r = rotate(chest, sh * BodyModel::bone_axis_right());
    ArmSolution left, right;
    if (!solve_arm(shoulder_l, contact, model.length(Link::kUpperArmLeft), BodyModel::bone_axis_left(), v0_left,
                   ang(rng), 0.8 * u(rng), left)) {
      continue;
    }
    if (!solve_arm(shoulder_r, contact, model.length(Link::kUpperArmRight), BodyModel::bone_axis_right(), v0_right,
                   ang(rng), 0.8 * u(rng), right)) {
      continue;
    }
    out.push_back({chest, left.upper, left.fore, right.upper, right.fore});
  }
  return out;
}

}  // namespace imupose
