#include "imupose/smekf.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <numbers>

using namespace imupose;
using std::numbers::pi;

namespace {

Quaternion from_v4(const oracle::V4& v) { return {v(0), v(1), v(2), v(3)}; }

FilterConfig default_config(double var = 1e-5) {
  NoiseParams n;
  n.sigma_omega = Mat3::Identity() * var;
  n.sigma_g = Mat3::Identity() * var;
  return make_filter_config(n);
}

FilterState random_state(oracle::Gen& gen) {
  FilterState s;
  s.q_hat = from_v4(gen.quat());
  s.b_hat = gen.vec(0.05);
  Mat6 m;
  for (int i = 0; i < 36; ++i) m(i) = gen.normal(0.05);
  s.P = m * m.transpose() + Mat6::Identity() * 1e-6;
  s.t = gen.uniform(0.0, 10.0);
  return s;
}

SensorCalibration level_calibration(double gyro_var, double accel_var) {
  SensorCalibration c;
  c.sigma_omega_hat = Mat3::Identity() * gyro_var;
  c.sigma_g_hat = Mat3::Identity() * accel_var;
  return c;
}

double roll_error_deg(const Quaternion& q) { return std::abs(to_euler_zyx(q).roll) * kDegPerRad; }

}  // namespace

TEST(Predict, ZeroNetRateKeepsAttitudeAndGrowsCovariance) {
  oracle::Gen gen(51);
  const FilterConfig cfg = default_config();
  for (int i = 0; i < 50; ++i) {
    FilterState s = random_state(gen);
    s.P = cfg.P0;
    const double dt = gen.uniform(1e-4, 0.1);
    const FilterState n = predict(s, {s.t + dt, s.b_hat, Vec3::UnitZ()}, cfg);
    EXPECT_LT(angle_between(n.q_hat, s.q_hat), 1e-12);
    EXPECT_GT(n.P.trace(), s.P.trace());
    EXPECT_EQ(n.b_hat, s.b_hat);
    EXPECT_EQ(n.a_hat, Vec3::Zero());
  }
}

TEST(Predict, ConstantRateHalfTurn) {
  const FilterConfig cfg = default_config();
  FilterState s;
  for (int i = 1; i <= 1000; ++i) s = predict(s, {i * 0.001, Vec3(0, 0, pi), Vec3::UnitZ()}, cfg);
  EXPECT_LT(angle_between(s.q_hat, Quaternion{0, 0, 0, 1}), 1e-6);
}

TEST(Predict, TimeErrors) {
  const FilterConfig cfg = default_config();
  FilterState s;
  s.t = 0.0;
  try {
    predict(s, {0.0, Vec3::Zero(), Vec3::UnitZ()}, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonMonotoneTime);
  }
  try {
    predict(s, {0.1001, Vec3::Zero(), Vec3::UnitZ()}, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kExcessiveDt);
  }
  EXPECT_NO_THROW(predict(s, {0.1, Vec3::Zero(), Vec3::UnitZ()}, cfg));
}

TEST(Jacobians, TransitionMatchesFiniteDifferences) {
  oracle::Gen gen(52);
  for (int i = 0; i < 100; ++i) {
    const Vec3 omega_hat = gen.vec(5.0), b_hat = gen.vec(0.1);
    const double dt = gen.uniform(1e-3, 0.1);
    oracle::V6 x0;
    x0 << gen.vec(0.1), b_hat + gen.vec(0.01);
    const auto fn = [&](const oracle::V6& x) { return oracle::error_transition(x, omega_hat, b_hat, dt); };
    const Mat6 fd = oracle::central_jacobian(fn, x0, 1e-6);
    EXPECT_LE(oracle::relative_error(transition_jacobian(omega_hat, dt), fd), 1e-6);
  }
}

TEST(Jacobians, MeasurementMatchesFiniteDifferences) {
  oracle::Gen gen(53);
  for (int i = 0; i < 100; ++i) {
    const oracle::V4 q = gen.quat();
    oracle::V6 x0;
    x0 << Vec3::Zero(), gen.vec(0.1);
    const auto fn = [&](const oracle::V6& x) { return oracle::static_measurement(q, x); };
    const Mat6 fd = oracle::central_jacobian(fn, x0, 1e-6);
    EXPECT_LE(oracle::relative_error(measurement_jacobian(from_v4(q)), fd), 1e-6);
  }
}

TEST(Jacobians, NoiseJacobianShape) {
  const Mat6 g = noise_jacobian(0.01);
  EXPECT_EQ(Mat3(g.topLeftCorner<3, 3>()), Mat3(-0.01 * Mat3::Identity()));
  EXPECT_EQ(Mat3(g.bottomRightCorner<3, 3>()), Mat3(0.01 * Mat3::Identity()));
  EXPECT_EQ(Mat3(g.topRightCorner<3, 3>()), Mat3::Zero());
}

TEST(Correct, PerfectMeasurementOnlyContractsCovariance) {
  oracle::Gen gen(54);
  const FilterConfig cfg = default_config();
  for (int i = 0; i < 100; ++i) {
    const FilterState s = random_state(gen);
    const ImuSample y{s.t, s.b_hat, rotate_inverse(s.q_hat, kGravityInertial)};
    const FilterState n = correct(s, y, cfg);
    EXPECT_LE(angle_between(n.q_hat, s.q_hat), 1e-12);
    EXPECT_LT((n.b_hat - s.b_hat).norm(), 1e-12);
    EXPECT_LE(n.P.trace(), s.P.trace());
  }
}

TEST(Correct, TwoDegreeRollRemovedInOneStep) {
  FilterConfig cfg = default_config();
  cfg.R = Mat6::Identity() * 1e-12;
  const SensorCalibration calib = level_calibration(1e-5, 1e-5);
  FilterState s = initial_state(calib, cfg, 0.0, false);
  s.q_hat = from_axis_angle(Vec3::UnitX(), 2.0 * kRadPerDeg);
  const FilterState n = correct(s, {0.0, Vec3::Zero(), Vec3(0, 0, 1)}, cfg);
  EXPECT_LE(roll_error_deg(n.q_hat), 0.02);
}

TEST(Correct, BiasConvergesUnderStaticCorrections) {
  const FilterConfig cfg = default_config();
  const SensorCalibration calib = level_calibration(1e-5, 1e-5);
  FilterState s = initial_state(calib, cfg, 0.0, false);
  const Vec3 bias(0.01, 0, 0);
  for (int i = 1; i <= 100; ++i) {
    const ImuSample y{i * 0.01, bias, Vec3(0, 0, 1)};
    s = correct(predict(s, y, cfg), y, cfg);
  }
  EXPECT_LE((s.b_hat - bias).norm(), 1e-3);
}

TEST(Correct, SingularInnovation) {
  FilterConfig cfg = default_config();
  cfg.R = Mat6::Zero();
  FilterState s;
  s.P = Mat6::Zero();
  try {
    correct(s, {0.0, Vec3::Zero(), Vec3::UnitZ()}, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSingularInnovation);
  }
}

TEST(Correct, NeverIncreasesTrace) {
  oracle::Gen gen(55);
  const FilterConfig cfg = default_config(1e-4);
  for (int i = 0; i < 500; ++i) {
    const FilterState s = random_state(gen);
    const ImuSample y{s.t, gen.vec(0.1), Vec3(0, 0, 1) + gen.vec(0.05)};
    EXPECT_LE(correct(s, y, cfg).P.trace(), s.P.trace() + 1e-15);
  }
}

TEST(InitialState, HeadingVarianceAlongVertical) {
  const FilterConfig cfg = default_config();
  SensorCalibration calib = level_calibration(1e-5, 1e-5);
  calib.q0 = from_euler_zyx(0.3, -0.2, 0.0);
  const FilterState s = initial_state(calib, cfg, 2.0, false);
  const Vec3 up = rotate_inverse(calib.q0, kGravityInertial);
  const Mat3 pa = s.P.topLeftCorner<3, 3>();
  EXPECT_NEAR(up.dot(pa * up), kDefaultP0HeadingStd * kDefaultP0HeadingStd, 1e-15);
  const Vec3 side = up.cross(Vec3::UnitX()).normalized();
  EXPECT_NEAR(side.dot(pa * side), kDefaultP0AngleStd * kDefaultP0AngleStd, 1e-15);
  EXPECT_GE(min_eigenvalue(s.P), 0.0);
  EXPECT_EQ(s.t, 2.0);
  EXPECT_EQ(s.b_hat, Vec3::Zero());
  calib.bias0 = Vec3(1, 2, 3);
  EXPECT_EQ(initial_state(calib, cfg, 0.0, true).b_hat, calib.bias0);
}

TEST(MakeFilterConfig, AssemblesBlocks) {
  NoiseParams n;
  n.sigma_omega = Mat3::Identity() * 2e-5;
  n.sigma_g = Mat3::Identity() * 3e-5;
  n.sigma_b = Mat3::Identity() * 4e-10;
  const FilterConfig c = make_filter_config(n);
  EXPECT_NEAR(c.R(0, 0), 3e-5 + n.variance_floor, 1e-20);
  EXPECT_NEAR(c.R(3, 3), 2e-5 + n.variance_floor, 1e-20);
  EXPECT_EQ(c.Q(0, 0), 2e-5);
  EXPECT_EQ(c.Q(5, 5), 4e-10);
  EXPECT_DOUBLE_EQ(c.P0(0, 0), 0.01);
  EXPECT_DOUBLE_EQ(c.P0(4, 4), 1e-4);
  n.alpha = -1;
  EXPECT_THROW(make_filter_config(n), Error);
}

TEST(Step, RandomMotionKeepsNormAndCovarianceHealthy) {
  oracle::Gen gen(56);
  const FilterConfig cfg = default_config(1e-5);
  const SensorCalibration calib = level_calibration(1e-5, 1e-5);
  Smekf f(calib, cfg, 0.0);
  f.prime({0.0, Vec3::Zero(), Vec3::UnitZ()});
  for (int i = 1; i <= 20000; ++i) {
    // alternate still and moving stretches so both branches run
    const bool moving = (i / 500) % 2 == 1;
    const Vec3 gyro = moving ? gen.vec(3.0) : Vec3(gen.normal(0.003), gen.normal(0.003), gen.normal(0.003));
    const Vec3 accel = rotate_inverse(f.attitude(), kGravityInertial) + gen.vec(moving ? 0.3 : 0.003);
    f.update({i * 0.001, gyro, accel});
    const auto& s = f.state();
    ASSERT_LE(std::abs(s.q_hat.norm() - 1.0), 1e-7);
    ASSERT_LE((s.P - s.P.transpose()).cwiseAbs().maxCoeff(), 1e-9);
    if (i % 97 == 0) ASSERT_GE(min_eigenvalue(s.P), -1e-9);
  }
  EXPECT_GT(f.corrections(), 0u);
}

TEST(Step, NeverStaticEqualsOpenLoopIntegration) {
  oracle::Gen gen(57);
  const FilterConfig cfg = default_config();
  const SensorCalibration calib = level_calibration(1e-6, 1e-6);
  Smekf f(calib, cfg, 0.0);
  f.prime({0.0, Vec3::Zero(), Vec3::UnitZ()});
  Quaternion q = calib.q0;
  for (int i = 1; i <= 3000; ++i) {
    const ImuSample s{i * 0.01, gen.vec(2.0), Vec3(0, 0, 1) + gen.vec(0.5)};
    EXPECT_FALSE(f.update(s).is_static);
    q = q * exp_rotation((s.gyro - Vec3::Zero()) * (s.t - (i - 1) * 0.01));
    ASSERT_EQ(f.attitude(), q) << i;
  }
  EXPECT_EQ(f.corrections(), 0u);
}

TEST(Step, CorrectionsDisabledEqualsOpenLoopOnStaticData) {
  oracle::Gen gen(58);
  FilterConfig cfg = default_config();
  cfg.corrections_enabled = false;
  const SensorCalibration calib = level_calibration(1e-5, 1e-5);
  Smekf f(calib, cfg, 0.0);
  Quaternion q = calib.q0;
  double t = 0.0;
  for (int i = 1; i <= 2000; ++i) {
    const double prev = t;
    t += 0.001 * (1.0 + 0.5 * (i % 3));
    const ImuSample s{t, Vec3(0.02, 0.02, 0.02) + gen.vec(0.003), Vec3::UnitZ()};
    f.update(s);
    q = q * exp_rotation(s.gyro * (s.t - prev));
    ASSERT_EQ(f.attitude(), q) << i;
  }
}

TEST(Step, StaticStreamHoldsYaw) {
  oracle::Gen gen(59);
  const double sd_w = 0.002, sd_g = 0.002;
  const Vec3 bias(0.01, -0.008, 0.012);
  const auto sample = [&](int i) {
    return ImuSample{i * 0.01, bias + Vec3(gen.normal(sd_w), gen.normal(sd_w), gen.normal(sd_w)),
                     Vec3(0, 0, 1) + Vec3(gen.normal(sd_g), gen.normal(sd_g), gen.normal(sd_g))};
  };
  std::vector<ImuSample> cal;
  for (int i = 0; i < 201; ++i) cal.push_back(sample(i));
  const SensorCalibration calib = calibrate_stationary(cal);
  NoiseParams n = with_calibrated_noise(NoiseParams{}, calib);
  const FilterConfig cfg = make_filter_config(n);
  Smekf f(calib, cfg, cal.back().t);
  for (int i = 201; i <= 1200; ++i) f.update(sample(i));
  EXPECT_LE(std::abs(to_euler_zyx(f.attitude()).yaw) * kDegPerRad, 0.5);
  EXPECT_LE((f.bias() - bias).norm(), 0.1 * bias.norm());
}
