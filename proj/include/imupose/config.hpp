/**
 * @file config.hpp
 * @brief Pipeline configuration and its `key = value` file format.
 *
 *     # detector
 *     window_seconds = 0.5
 *     alpha = 2
 *     sim.bias = 0.0035
 *     body.upper_arm_right = 0.31
 */
#pragma once

#include "imupose/baselines.hpp"
#include "imupose/error.hpp"
#include "imupose/imu.hpp"
#include "imupose/io.hpp"
#include "imupose/kinematics.hpp"
#include "imupose/metrics.hpp"
#include "imupose/smekf.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <string>

namespace imupose {

struct SimSettings {
  double noise_scale{1.0};   ///< multiplies the realistic noise densities
  double drift_bias{0.02};   ///< rad/s on every axis, drift protocol
  double bias{0.0035};       ///< rad/s, per-axis uniform range for dynamic and track runs
  double shake_rate{3.0};    ///< rad/s
  double shake_force{0.5};   ///< g
};

struct PipelineConfig {
  double rate_hz{100.0};
  NoiseParams noise;
  double window_seconds{0.5};
  std::size_t window_n{0};  ///< overrides window_seconds when nonzero
  double p0_angle_std{kDefaultP0AngleStd};
  double p0_bias_std{kDefaultP0BiasStd};
  double p0_heading_std{kDefaultP0HeadingStd};
  bool init_bias_from_calibration{false};
  double calibration_seconds{2.0};
  double ncf_kp{kDefaultNcfKp};
  double ncf_ki{kDefaultNcfKi};
  double gdc_beta{kDefaultGdcBeta};
  EvaluationOptions evaluation;
  SimSettings sim;
  BodyModel body;
  double prior_tolerance{0.2};

  std::size_t detector_window(double rate) const {
    return window_n ? window_n : window_samples(rate, window_seconds);
  }

  void validate() const {
    const auto bad = [](const std::string& m) { throw Error(ErrorCode::kInvalidConfig, m); };
    if (!(rate_hz > 0.0)) bad("rate_hz must be positive");
    if (!(window_seconds > 0.0)) bad("window_seconds must be positive");
    if (window_n == 1) bad("window_n must be >= 2");
    if (!(calibration_seconds > 0.0)) bad("calibration_seconds must be positive");
    if (!(p0_angle_std > 0.0) || !(p0_bias_std > 0.0) || !(p0_heading_std > 0.0)) bad("p0 standard deviations must be positive");
    if (ncf_kp < 0.0 || ncf_ki < 0.0 || gdc_beta < 0.0) bad("gains must be non-negative");
    if (sim.noise_scale < 0.0) bad("sim.noise_scale must be non-negative");
    if (!(prior_tolerance >= 0.0 && prior_tolerance < 1.0)) bad("body.prior_tolerance must lie in [0, 1)");
    noise.validate();
    try {
      body.validate();
    } catch (const Error& e) {
      bad(e.what());
    }
  }
};

namespace detail {

inline bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw Error(ErrorCode::kInvalidConfig, key + ": expected a boolean, got '" + v + "'");
}

}  // namespace detail

inline void apply_setting(PipelineConfig& c, const std::string& key, const std::string& value) {
  const auto num = [&] {
    const auto v = detail::parse_double(value);
    if (!v || !std::isfinite(*v)) throw Error(ErrorCode::kInvalidConfig, key + ": expected a number, got '" + value + "'");
    return *v;
  };
  const std::map<std::string, std::function<void()>> setters{
      {"rate_hz", [&] { c.rate_hz = num(); }},
      {"window_seconds", [&] { c.window_seconds = num(); }},
      {"window_n", [&] {
         const double v = num();
         if (v < 0.0 || v != std::floor(v)) throw Error(ErrorCode::kInvalidConfig, "window_n must be a whole number");
         c.window_n = static_cast<std::size_t>(v);
       }},
      {"alpha", [&] { c.noise.alpha = num(); }},
      {"beta", [&] { c.noise.beta = num(); }},
      {"gamma1", [&] { c.noise.gamma1 = num(); }},
      {"gamma2", [&] { c.noise.gamma2 = num(); }},
      {"sigma_b", [&] { c.noise.sigma_b = Mat3::Identity() * num(); }},
      {"variance_floor", [&] { c.noise.variance_floor = num(); }},
      {"p0_angle_std", [&] { c.p0_angle_std = num(); }},
      {"p0_bias_std", [&] { c.p0_bias_std = num(); }},
      {"p0_heading_std", [&] { c.p0_heading_std = num(); }},
      {"init_bias_from_calibration", [&] { c.init_bias_from_calibration = detail::parse_bool(value, key); }},
      {"calibration_seconds", [&] { c.calibration_seconds = num(); }},
      {"ncf_kp", [&] { c.ncf_kp = num(); }},
      {"ncf_ki", [&] { c.ncf_ki = num(); }},
      {"gdc_beta", [&] { c.gdc_beta = num(); }},
      {"align_seconds", [&] { c.evaluation.align_seconds = num(); }},
      {"drift_window_seconds", [&] { c.evaluation.drift_window_seconds = num(); }},
      {"sim.noise_scale", [&] { c.sim.noise_scale = num(); }},
      {"sim.drift_bias", [&] { c.sim.drift_bias = num(); }},
      {"sim.bias", [&] { c.sim.bias = num(); }},
      {"sim.shake_rate", [&] { c.sim.shake_rate = num(); }},
      {"sim.shake_force", [&] { c.sim.shake_force = num(); }},
      {"body.prior_tolerance", [&] { c.prior_tolerance = num(); }},
      {"body.palm_offset", [&] {
         const auto v = parse_numbers(value, key, ErrorCode::kInvalidConfig);
         if (v.size() != 3) throw Error(ErrorCode::kInvalidConfig, "body.palm_offset needs three values");
         c.body.palm_offset_left = Vec3(v[0], v[1], v[2]);
       }},
  };
  if (const auto it = setters.find(key); it != setters.end()) {
    it->second();
    return;
  }
  if (key.rfind("body.", 0) == 0) {
    const std::string link = key.substr(5);
    for (std::size_t i = 0; i < kLinkCount; ++i) {
      if (link == link_name(static_cast<Link>(i))) {
        c.body.lengths[i] = num();
        return;
      }
    }
  }
  throw Error(ErrorCode::kInvalidConfig, "unknown config key '" + key + "'");
}

inline PipelineConfig parse_config(std::istream& in, const std::string& name = "<config>",
                                   PipelineConfig base = {}) {
  for (const auto& [key, value] : parse_key_values(in, name, ErrorCode::kInvalidConfig)) {
    apply_setting(base, key, value);
  }
  base.validate();
  return base;
}

inline PipelineConfig read_config(const std::string& path, PipelineConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open config '" + path + "'");
  return parse_config(in, path, std::move(base));
}

}  // namespace imupose
