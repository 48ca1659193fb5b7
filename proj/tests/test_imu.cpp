#include "imupose/imu.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numbers>

using namespace imupose;
using std::numbers::pi;

namespace {

std::vector<ImuSample> constant_stream(std::size_t n, const Vec3& gyro, const Vec3& accel, double dt = 0.01) {
  std::vector<ImuSample> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = {static_cast<double>(i) * dt, gyro, accel};
  return out;
}

std::vector<ImuSample> noisy_stream(std::size_t n, const Mat3& gyro_cov, const Mat3& accel_cov, const Vec3& bias,
                                    const Vec3& gravity, std::uint64_t seed) {
  oracle::Gen gen(seed);
  const Mat3 lw = gyro_cov.llt().matrixL();
  const Mat3 lg = accel_cov.llt().matrixL();
  std::vector<ImuSample> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 zw(gen.normal(), gen.normal(), gen.normal());
    const Vec3 zg(gen.normal(), gen.normal(), gen.normal());
    out[i] = {static_cast<double>(i) * 0.01, bias + lw * zw, gravity + lg * zg};
  }
  return out;
}

Vec3 predicted_gravity(const Quaternion& q) { return rotate_inverse(q, kGravityInertial); }

}  // namespace

TEST(CalibrateStationary, ConstantStreamGivesExactValues) {
  const auto s = constant_stream(300, Vec3(0.01, 0, 0), Vec3(0, 0, 1));
  const SensorCalibration c = calibrate_stationary(s);
  EXPECT_EQ(c.bias0, Vec3(0.01, 0, 0));
  EXPECT_EQ(c.sigma_omega_hat, Mat3::Zero());
  EXPECT_EQ(c.sigma_g_hat, Mat3::Zero());
  EXPECT_LT(angle_between(c.q0, Quaternion::identity()), 1e-12);
  EXPECT_EQ(c.sample_count, 300u);
}

TEST(CalibrateStationary, CovarianceMatchesGenerator) {
  Mat3 cov;
  cov << 4e-4, 1e-4, 0, 1e-4, 2e-4, -5e-5, 0, -5e-5, 3e-4;
  const auto s = noisy_stream(5000, cov, cov * 0.1, Vec3(0.01, -0.02, 0.005), Vec3(0, 0, 1), 21);
  const SensorCalibration c = calibrate_stationary(s);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(c.sigma_omega_hat(i, i), cov(i, i), 0.2 * cov(i, i));
  EXPECT_LT((c.sigma_omega_hat - cov).norm(), 0.2 * cov.norm());
  EXPECT_LT((c.sigma_g_hat - 0.1 * cov).norm(), 0.2 * 0.1 * cov.norm());
  EXPECT_LT((c.bias0 - Vec3(0.01, -0.02, 0.005)).norm(), 1e-3);
}

TEST(CalibrateStationary, TenDegreeRoll) {
  const double r = 10.0 * kRadPerDeg;
  const auto s = constant_stream(300, Vec3::Zero(), Vec3(0, std::sin(r), std::cos(r)));
  const SensorCalibration c = calibrate_stationary(s);
  EXPECT_LT(angle_between(c.q0, from_axis_angle(Vec3::UnitX(), r)), 1e-6);
}

TEST(CalibrateStationary, PermutationInsensitive) {
  auto s = noisy_stream(400, Mat3::Identity() * 1e-4, Mat3::Identity() * 1e-5, Vec3(0.001, 0, 0), Vec3(0, 0, 1), 5);
  const SensorCalibration a = calibrate_stationary(s);
  std::vector<ImuSample> shuffled = s;
  oracle::Gen gen(6);
  std::shuffle(shuffled.begin(), shuffled.end(), gen.engine());
  for (std::size_t i = 0; i < shuffled.size(); ++i) shuffled[i].t = s[i].t;
  const SensorCalibration b = calibrate_stationary(shuffled);
  EXPECT_LT((a.bias0 - b.bias0).norm(), 1e-12);
  EXPECT_LT((a.sigma_omega_hat - b.sigma_omega_hat).norm(), 1e-12);
  EXPECT_LT((a.sigma_g_hat - b.sigma_g_hat).norm(), 1e-12);
  EXPECT_LT(angle_between(a.q0, b.q0), 1e-9);
}

TEST(CalibrateStationary, CovariancesSymmetricPsd) {
  const auto s = noisy_stream(500, Mat3::Identity() * 1e-4, Mat3::Identity() * 1e-5, Vec3::Zero(), Vec3(0, 0, 1), 8);
  const SensorCalibration c = calibrate_stationary(s);
  for (const Mat3& m : {c.sigma_omega_hat, c.sigma_g_hat}) {
    EXPECT_LT((m - m.transpose()).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_GE(Eigen::SelfAdjointEigenSolver<Mat3>(m).eigenvalues().minCoeff(), 0.0);
  }
}

TEST(CalibrateStationary, TooFewSamples) {
  try {
    calibrate_stationary(constant_stream(199, Vec3::Zero(), Vec3(0, 0, 1)));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTooFewSamples);
  }
  // 200 samples at 1 kHz span less than 2 s
  try {
    calibrate_stationary(constant_stream(500, Vec3::Zero(), Vec3(0, 0, 1), 0.001));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTooFewSamples);
  }
}

TEST(CalibrateStationary, OffGravityIsNotStationary) {
  try {
    calibrate_stationary(constant_stream(300, Vec3::Zero(), Vec3(0, 0, 1.1)));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNotStationary);
  }
}

TEST(CalibrateStationary, GyroSpikeIsNotStationary) {
  auto s = noisy_stream(1000, Mat3::Identity() * 1e-6, Mat3::Identity() * 1e-6, Vec3::Zero(), Vec3(0, 0, 1), 9);
  s[500].gyro.x() += 0.5;
  try {
    calibrate_stationary(s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNotStationary);
  }
}

TEST(InitialAttitude, UprightIsIdentity) {
  EXPECT_LT(angle_between(initial_attitude_from_gravity(Vec3(0, 0, 1)), Quaternion::identity()), 1e-15);
}

TEST(InitialAttitude, UpsideDownIsHalfTurnAboutX) {
  const Quaternion q = initial_attitude_from_gravity(Vec3(0, 0, -1));
  EXPECT_LT(angle_between(q, from_axis_angle(Vec3::UnitX(), pi)), 1e-12);
}

TEST(InitialAttitude, ReproducesDirectionWithZeroYaw) {
  oracle::Gen gen(31);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 axis = Vec3(gen.normal(), gen.normal(), 0.0).normalized();
    const double tilt = gen.uniform(0.0, pi / 3);
    const Vec3 dir = oracle::axis_angle_matrix(axis, tilt).transpose() * Vec3::UnitZ();
    const double mag = gen.uniform(0.85, 1.15);
    const Quaternion q = initial_attitude_from_gravity(dir * mag);
    EXPECT_LT((predicted_gravity(q) - dir).norm(), 1e-9);
    EXPECT_NEAR(to_euler_zyx(q).yaw, 0.0, 1e-12);
  }
}

TEST(InitialAttitude, DegenerateMagnitude) {
  for (double m : {0.0, 0.79, 1.21, 5.0}) {
    try {
      initial_attitude_from_gravity(Vec3(0, 0, m));
      FAIL() << m;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kDegenerateGravity);
    }
  }
  EXPECT_NO_THROW(initial_attitude_from_gravity(Vec3(0, 0, 0.8)));
  EXPECT_NO_THROW(initial_attitude_from_gravity(Vec3(0, 0, 1.2)));
}

TEST(NoiseParams, DefaultsValidate) {
  NoiseParams p;
  EXPECT_NO_THROW(p.validate());
  EXPECT_EQ(p.alpha, 2.0);
  EXPECT_EQ(p.beta, 2.0);
  EXPECT_EQ(p.gamma1, 0.01);
  EXPECT_EQ(p.gamma2, 0.01);
}

TEST(NoiseParams, RejectsInvalid) {
  const auto expect_invalid = [](const NoiseParams& p) {
    try {
      p.validate();
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kInvalidConfig);
    }
  };
  NoiseParams p;
  p.alpha = 0.0;
  expect_invalid(p);
  p = {};
  p.window_n = 1;
  expect_invalid(p);
  p = {};
  p.sigma_omega(0, 1) = 1.0;
  expect_invalid(p);
  p = {};
  p.sigma_b(2, 2) = -1.0;
  expect_invalid(p);
}

TEST(WindowSamples, RoundsAndClamps) {
  EXPECT_EQ(window_samples(100.0, 0.2), 20u);
  EXPECT_EQ(window_samples(1000.0, 0.2), 200u);
  EXPECT_EQ(window_samples(100.0, 0.001), 2u);
}
