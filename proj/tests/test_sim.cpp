#include "imupose/sim.hpp"
#include "imupose/static_detector.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <numbers>

using namespace imupose;
using std::numbers::pi;

namespace {

TrajectorySpec spec_of(double rate, std::vector<Phase> phases, Quaternion q0 = Quaternion::identity()) {
  TrajectorySpec s;
  s.sample_rate = rate;
  s.phases = std::move(phases);
  for (const auto& p : s.phases) s.duration += p.duration;
  s.initial_attitude = q0;
  s.seed = 17;
  return s;
}

// Worst angle between the truth stream and the integrated truth rate.
double integration_error(const Motion& motion, const GroundTruth& gt) {
  const auto q = oracle::integrate_body_rate([&](double t) { return motion.rate(t); }, gt.q.front().coeffs(), gt.t, 32);
  double worst = 0.0;
  for (std::size_t k = 0; k < gt.size(); ++k) worst = std::max(worst, oracle::quat_angle(q[k], gt.q[k].coeffs()));
  return worst;
}

void expect_code(const std::function<void()>& fn, ErrorCode code) {
  try {
    fn();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code);
  }
}

}  // namespace

TEST(Generate, StaticZeroNoise) {
  const Quaternion q0 = from_euler_zyx(0.2, -0.1, 1.0);
  const Simulation sim = generate(spec_of(100, {Phase::still(3.0)}, q0), zero_noise(), Vec3::Zero());
  ASSERT_EQ(sim.samples.size(), 301u);
  const Vec3 g = oracle::quat_matrix(q0.coeffs()).transpose() * Vec3::UnitZ();
  for (std::size_t k = 0; k < sim.samples.size(); ++k) {
    EXPECT_EQ(sim.samples[k].gyro, Vec3::Zero());
    EXPECT_LT((sim.samples[k].accel - g).norm(), 1e-15);
    EXPECT_EQ(sim.truth.q[k], sim.truth.q.front());
  }
  EXPECT_DOUBLE_EQ(sim.samples.back().t, 3.0);
}

TEST(Generate, HalfTurnAboutZ) {
  const Simulation sim =
      generate(spec_of(100, {Phase::still(1.0), Phase::rotate(2.0, Vec3(0, 0, pi))}), zero_noise(), Vec3::Zero());
  EXPECT_LT(angle_between(sim.truth.q.back(), Quaternion{0, 0, 0, 1}), 1e-9);
  EXPECT_LT(sim.truth.rate.back().norm(), 1e-12);
  // raised-cosine peak rate is twice the mean rate
  double peak = 0.0;
  for (const auto& w : sim.truth.rate) peak = std::max(peak, w.norm());
  EXPECT_NEAR(peak, 2.0 * pi / 2.0, 1e-3);
}

TEST(Generate, NoiseCovarianceMatchesModel) {
  NoiseParams n = zero_noise();
  n.sigma_omega << 4e-5, 1e-5, 0, 1e-5, 2e-5, 0, 0, 0, 3e-5;
  n.sigma_g = Mat3::Identity() * 1e-5;
  const Vec3 bias(0.01, 0.02, -0.03);
  const Simulation sim = generate(spec_of(100, {Phase::still(50.0)}, from_euler_zyx(0.1, 0.2, 0.3)), n, bias);
  ASSERT_GE(sim.samples.size(), 5000u);
  Mat3 cg = Mat3::Zero(), ca = Mat3::Zero();
  for (std::size_t k = 0; k < sim.samples.size(); ++k) {
    const Vec3 dw = sim.samples[k].gyro - sim.truth.rate[k] - sim.truth.bias[k];
    const Vec3 da = sim.samples[k].accel - sim.truth.specific_force[k];
    cg += dw * dw.transpose();
    ca += da * da.transpose();
  }
  cg /= static_cast<double>(sim.samples.size());
  ca /= static_cast<double>(sim.samples.size());
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(cg(i, i), n.sigma_omega(i, i), 0.2 * n.sigma_omega(i, i));
    EXPECT_NEAR(ca(i, i), n.sigma_g(i, i), 0.2 * n.sigma_g(i, i));
  }
  EXPECT_NEAR(cg(0, 1), 1e-5, 0.2 * std::sqrt(4e-5 * 2e-5));
  EXPECT_EQ(sim.truth.bias.back(), bias);
}

TEST(Generate, BiasRandomWalkAdvances) {
  NoiseParams n = zero_noise();
  n.sigma_b = Mat3::Identity() * 1e-6;
  const Simulation sim = generate(spec_of(100, {Phase::still(20.0)}), n, Vec3::Zero());
  EXPECT_GT(sim.truth.bias.back().norm(), 0.0);
  for (std::size_t k = 0; k < sim.samples.size(); ++k) {
    ASSERT_LT((sim.samples[k].gyro - sim.truth.bias[k]).norm(), 1e-15);
  }
}

TEST(Generate, RateIntegratesToAttitudeOverSixtySeconds) {
  const TrajectorySpec spec = drift_protocol(1000.0, 3);
  const Simulation sim = generate(spec, zero_noise(), Vec3::Zero());
  EXPECT_DOUBLE_EQ(sim.truth.t.back(), 60.0);
  EXPECT_LE(integration_error(sim.motion, sim.truth), 1e-6);
}

TEST(Generate, DynamicProtocolSelfConsistent) {
  const Simulation sim = generate(dynamic_protocol(100.0, 4), zero_noise(), Vec3::Zero());
  EXPECT_DOUBLE_EQ(sim.truth.t.back(), 60.0);
  EXPECT_LE(integration_error(sim.motion, sim.truth), 1e-6);
  for (const auto& q : sim.truth.q) ASSERT_LE(std::abs(q.norm() - 1.0), 1e-12);
}

TEST(Generate, ShakeChangesSpecificForceNorm) {
  const Simulation sim =
      generate(spec_of(100, {Phase::still(1.0), Phase::shake(4.0, 3.0, 0.5), Phase::still(1.0)}), zero_noise(),
               Vec3::Zero());
  double max_dev = 0.0;
  for (std::size_t k = 0; k < sim.samples.size(); ++k) {
    const double dev = std::abs(sim.truth.specific_force[k].norm() - 1.0);
    if (sim.truth.t[k] <= 1.0 || sim.truth.t[k] >= 5.0) {
      EXPECT_LT(dev, 1e-12);
    }
    max_dev = std::max(max_dev, dev);
  }
  EXPECT_GT(max_dev, 0.3);
}

TEST(Generate, StaticPhasesPassDetectorWithMatchedCalibration) {
  const NoiseParams n = realistic_noise(100.0);
  const Simulation sim = generate(drift_protocol(100.0, 5), n, Vec3(0.02, 0.02, 0.02));
  const std::span<const ImuSample> cal(sim.samples.data(), 201);
  const SensorCalibration c = calibrate_stationary(cal);
  DetectorWindow w(window_samples(100.0, 0.5));
  std::size_t total = 0, hits = 0;
  for (const auto& s : sim.samples) {
    w.push(s);
    // windows lying fully inside the final still phase
    if (s.t >= 35.5 + 1e-9) {
      ++total;
      hits += check_static(w, c, n).is_static;
    }
  }
  EXPECT_GE(static_cast<double>(hits), 0.95 * static_cast<double>(total));
}

TEST(Generate, InvalidSpecs) {
  expect_code([] { generate(spec_of(100, {}), zero_noise(), Vec3::Zero()); }, ErrorCode::kInvalidSpec);
  expect_code(
      [] {
        TrajectorySpec s = spec_of(100, {Phase::still(1.0)});
        s.duration = 2.0;
        compile(s);
      },
      ErrorCode::kInvalidSpec);
  expect_code([] { compile(spec_of(100, {Phase::still(1.005)})); }, ErrorCode::kInvalidSpec);
  expect_code([] { compile(spec_of(0, {Phase::still(1.0)})); }, ErrorCode::kInvalidSpec);
  expect_code([] { compile(spec_of(100, {Phase::still(1.0)}, Quaternion{2, 0, 0, 0})); }, ErrorCode::kInvalidSpec);
  expect_code([] { compile(spec_of(100, {Phase::still(-1.0), Phase::still(2.0)})); }, ErrorCode::kInvalidSpec);
}

TEST(Generate, Reproducible) {
  const NoiseParams n = realistic_noise(100.0);
  const Simulation a = generate(dynamic_protocol(100.0, 8), n, Vec3(0.01, 0, 0));
  const Simulation b = generate(dynamic_protocol(100.0, 8), n, Vec3(0.01, 0, 0));
  ASSERT_EQ(a.samples.size(), b.samples.size());
  for (std::size_t k = 0; k < a.samples.size(); ++k) {
    ASSERT_EQ(a.samples[k].gyro, b.samples[k].gyro);
    ASSERT_EQ(a.samples[k].accel, b.samples[k].accel);
    ASSERT_EQ(a.truth.q[k], b.truth.q[k]);
  }
  const Simulation c = generate(dynamic_protocol(100.0, 9), n, Vec3(0.01, 0, 0));
  EXPECT_NE(a.samples[100].gyro, c.samples[100].gyro);
}

TEST(Protocols, Durations) {
  for (double rate : {100.0, 1000.0}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const TrajectorySpec d = dynamic_protocol(rate, seed);
      EXPECT_NO_THROW(validate(d));
      EXPECT_DOUBLE_EQ(d.duration, 60.0);
      EXPECT_EQ(d.phases.front().kind, PhaseKind::kStatic);
      EXPECT_EQ(d.phases.back().kind, PhaseKind::kStatic);
    }
    EXPECT_NO_THROW(validate(drift_protocol(rate, 1)));
  }
}

TEST(RealisticNoise, ScalesWithBandwidth) {
  const NoiseParams a = realistic_noise(100.0), b = realistic_noise(1000.0);
  EXPECT_NEAR(b.sigma_omega(0, 0) / a.sigma_omega(0, 0), 10.0, 1e-12);
  EXPECT_NEAR(std::sqrt(a.sigma_g(0, 0)), 120e-6 * std::sqrt(50.0), 1e-15);
}

TEST(GenerateBody, StaticHandsConstant) {
  BodySpec body;
  oracle::Gen gen(81);
  for (auto& s : body.segments) {
    s = spec_of(100, {Phase::still(2.0)}, Quaternion{gen.quat()(0), gen.quat()(1), gen.quat()(2), gen.quat()(3)}.normalized());
  }
  const BodyModel m;
  std::array<Vec3, kSegmentCount> biases{};
  const BodySimulation sim = generate_body(body, m, zero_noise(), biases);
  const ChainPoses p = forward_kinematics(m, sim.start_posture);
  for (std::size_t k = 0; k < sim.t.size(); ++k) {
    EXPECT_LT((sim.hand_left[k] - p.hand_left).norm(), 1e-15);
    EXPECT_LT((sim.hand_right[k] - p.hand_right).norm(), 1e-15);
  }
  for (const auto& stream : sim.samples) {
    for (const auto& s : stream) EXPECT_NEAR(s.accel.norm(), 1.0, 1e-6);
  }
}

TEST(GenerateBody, MisalignedSpecs) {
  BodySpec body;
  for (auto& s : body.segments) s = spec_of(100, {Phase::still(2.0)});
  body.segments[3] = spec_of(100, {Phase::still(3.0)});
  std::array<Vec3, kSegmentCount> biases{};
  expect_code([&] { generate_body(body, BodyModel{}, zero_noise(), biases); }, ErrorCode::kMisalignedSpecs);
  body.segments[3] = spec_of(1000, {Phase::still(2.0)});
  expect_code([&] { generate_body(body, BodyModel{}, zero_noise(), biases); }, ErrorCode::kMisalignedSpecs);
}

TEST(GenerateBody, CirclesCloseEachLoop) {
  const BodySpec body = circles_preset(100.0, 2);
  std::array<Vec3, kSegmentCount> biases{};
  const BodySimulation sim = generate_body(body, BodyModel{}, zero_noise(), biases);
  const auto& phases = body.segments[static_cast<std::size_t>(Segment::kForearmRight)].phases;
  double t = 0.0;
  int loops = 0;
  for (const auto& p : phases) {
    if (p.kind == PhaseKind::kLoop) {
      const auto k0 = static_cast<std::size_t>(std::llround(t * 100.0));
      const auto k1 = static_cast<std::size_t>(std::llround((t + p.duration) * 100.0));
      EXPECT_LT((sim.hand_right[k1] - sim.hand_right[k0]).norm(), 1e-6);
      double excursion = 0.0;
      for (std::size_t k = k0; k <= k1; ++k) excursion = std::max(excursion, (sim.hand_right[k] - sim.hand_right[k0]).norm());
      EXPECT_GT(excursion, 0.1);
      ++loops;
    }
    t += p.duration;
  }
  EXPECT_EQ(loops, 6);
  for (std::size_t i = 0; i < kSegmentCount; ++i) EXPECT_LE(integration_error(sim.motions[i], sim.truth[i]), 1e-6);
}

TEST(GenerateBody, SensorAccelerationIncludesLimbMotion) {
  const BodySpec body = circles_preset(100.0, 3);
  std::array<Vec3, kSegmentCount> biases{};
  const BodySimulation sim = generate_body(body, BodyModel{}, zero_noise(), biases);
  const auto& fa = sim.truth[static_cast<std::size_t>(Segment::kForearmRight)];
  double max_dev = 0.0;
  for (const auto& f : fa.specific_force) max_dev = std::max(max_dev, std::abs(f.norm() - 1.0));
  EXPECT_GT(max_dev, 0.01);
  EXPECT_NEAR(fa.specific_force.front().norm(), 1.0, 1e-6);
}
