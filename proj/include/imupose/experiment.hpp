/**
 * @file experiment.hpp
 * @brief End-to-end runs: calibrate, filter, optionally reconstruct the
 * arms, evaluate, and write the reports.
 */
#pragma once

#include "imupose/baselines.hpp"
#include "imupose/config.hpp"
#include "imupose/error.hpp"
#include "imupose/io.hpp"
#include "imupose/kinematics.hpp"
#include "imupose/metrics.hpp"
#include "imupose/sim.hpp"
#include "imupose/smekf.hpp"

#include <cstdint>
#include <future>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace imupose {

enum class Algorithm { kSmekf, kNcf, kGdc, kPredict };
enum class ExperimentKind { kDrift, kDynamic, kTrack };

inline const char* algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::kSmekf: return "smekf";
    case Algorithm::kNcf: return "ncf";
    case Algorithm::kGdc: return "gdc";
    case Algorithm::kPredict: return "predict";
  }
  return "unknown";
}

inline const char* experiment_name(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::kDrift: return "drift";
    case ExperimentKind::kDynamic: return "dynamic";
    case ExperimentKind::kTrack: return "track";
  }
  return "unknown";
}

inline Algorithm parse_algorithm(const std::string& s) {
  if (s == "smekf") return Algorithm::kSmekf;
  if (s == "ncf") return Algorithm::kNcf;
  if (s == "gdc") return Algorithm::kGdc;
  if (s == "predict") return Algorithm::kPredict;
  throw Error(ErrorCode::kInvalidArgument, "unknown algorithm '" + s + "'");
}

inline ExperimentKind parse_experiment(const std::string& s) {
  if (s == "drift") return ExperimentKind::kDrift;
  if (s == "dynamic") return ExperimentKind::kDynamic;
  if (s == "track") return ExperimentKind::kTrack;
  throw Error(ErrorCode::kInvalidArgument, "unknown experiment '" + s + "'");
}

struct FilterRun {
  std::vector<double> t;
  std::vector<Quaternion> q;
  SensorCalibration calibration;
  std::size_t calibration_end{0};  ///< index of the last calibration sample
  std::uint64_t corrections{0};
  std::uint64_t static_samples{0};
};

/// Leading samples spanning calibration_seconds (both ends included).
inline std::span<const ImuSample> calibration_span(std::span<const ImuSample> samples, double seconds) {
  if (samples.empty()) throw Error(ErrorCode::kTooFewSamples, "empty stream");
  const double t_end = samples.front().t + seconds;
  std::size_t n = 0;
  while (n < samples.size() && samples[n].t <= t_end + 1e-9) ++n;
  return samples.first(n);
}

inline FilterRun run_filter(Algorithm algo, std::span<const ImuSample> samples, const PipelineConfig& cfg) {
  FilterRun run;
  const auto calib_span = calibration_span(samples, cfg.calibration_seconds);
  run.calibration = calibrate_stationary(calib_span);
  run.calibration_end = calib_span.size() - 1;
  run.t.reserve(samples.size());
  run.q.reserve(samples.size());

  const double t0 = samples.front().t;
  const auto drive = [&](auto& filter) {
    filter.prime(samples.front());
    run.t.push_back(t0);
    run.q.push_back(filter.attitude());
    for (std::size_t i = 1; i < samples.size(); ++i) {
      filter.update(samples[i]);
      run.t.push_back(samples[i].t);
      run.q.push_back(filter.attitude());
    }
  };

  switch (algo) {
    case Algorithm::kSmekf:
    case Algorithm::kPredict: {
      NoiseParams noise = with_calibrated_noise(cfg.noise, run.calibration);
      noise.window_n = cfg.detector_window(1.0 / detail::median_dt(samples));
      FilterConfig fc = make_filter_config(noise, cfg.p0_angle_std, cfg.p0_bias_std, cfg.p0_heading_std);
      fc.corrections_enabled = algo == Algorithm::kSmekf;
      Smekf filter(run.calibration, fc, t0, cfg.init_bias_from_calibration);
      filter.prime(samples.front());
      run.t.push_back(t0);
      run.q.push_back(filter.attitude());
      for (std::size_t i = 1; i < samples.size(); ++i) {
        if (filter.update(samples[i]).is_static) ++run.static_samples;
        run.t.push_back(samples[i].t);
        run.q.push_back(filter.attitude());
      }
      run.corrections = filter.corrections();
      break;
    }
    case Algorithm::kNcf: {
      Ncf filter(run.calibration.q0, t0, cfg.ncf_kp, cfg.ncf_ki);
      drive(filter);
      break;
    }
    case Algorithm::kGdc: {
      Gdc filter(run.calibration.q0, t0, cfg.gdc_beta);
      drive(filter);
      break;
    }
  }
  return run;
}

inline TruthRecord to_truth_record(const GroundTruth& gt, const std::vector<Vec3>& positions = {}) {
  TruthRecord r;
  r.t = gt.t;
  r.q = gt.q;
  r.position = positions;
  return r;
}

inline NoiseParams simulation_noise(const PipelineConfig& cfg) {
  NoiseParams n = realistic_noise(cfg.rate_hz);
  const double s2 = cfg.sim.noise_scale * cfg.sim.noise_scale;
  n.sigma_omega *= s2;
  n.sigma_g *= s2;
  n.sigma_b = cfg.sim.noise_scale > 0.0 ? cfg.noise.sigma_b : Mat3::Zero();
  return n;
}

inline Vec3 random_bias(std::mt19937_64& rng, double range) {
  std::uniform_real_distribution<double> u(-range, range);
  const double x = u(rng), y = u(rng), z = u(rng);
  return {x, y, z};
}

// ---------------------------------------------------------------------------
// Tracking

struct TrackingRun {
  std::vector<double> t;
  std::array<std::vector<Quaternion>, kSegmentCount> segment_q;
  std::vector<Vec3> hand_left;
  std::vector<Vec3> hand_right;
};

/// Filters the five sensor streams concurrently, maps each estimate into the
/// body frame with the known start posture (captured at the end of the
/// calibration window), and runs forward kinematics.
inline TrackingRun track_body(Algorithm algo, const std::array<std::vector<ImuSample>, kSegmentCount>& streams,
                              const BodyModel& model, const Attitudes& start_posture, const PipelineConfig& cfg) {
  model.validate();
  std::array<std::future<FilterRun>, kSegmentCount> jobs;
  for (std::size_t i = 0; i < kSegmentCount; ++i) {
    if (streams[i].size() != streams[0].size()) {
      throw Error(ErrorCode::kMisalignedSpecs, "sensor streams differ in length");
    }
    jobs[i] = std::async(std::launch::async, [&, i] { return run_filter(algo, streams[i], cfg); });
  }
  std::array<FilterRun, kSegmentCount> runs;
  for (std::size_t i = 0; i < kSegmentCount; ++i) runs[i] = jobs[i].get();

  TrackingRun out;
  out.t = runs[0].t;
  for (std::size_t i = 0; i < kSegmentCount; ++i) {
    const Quaternion ref = runs[i].q[runs[i].calibration_end];
    const Quaternion map = start_posture[i] * inverse(ref);
    out.segment_q[i].reserve(runs[i].q.size());
    for (const auto& q : runs[i].q) out.segment_q[i].push_back(map * q);
  }
  for (std::size_t k = 0; k < out.t.size(); ++k) {
    Attitudes att;
    for (std::size_t i = 0; i < kSegmentCount; ++i) att[i] = out.segment_q[i][k];
    const ChainPoses poses = forward_kinematics(model, att);
    out.hand_left.push_back(poses.hand_left);
    out.hand_right.push_back(poses.hand_right);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Experiments

struct ExperimentInputs {
  std::optional<std::vector<ImuSample>> imu;
  std::optional<TruthRecord> truth;
};

struct ExperimentResult {
  ErrorReport report;
  KeyValues summary;
};

inline KeyValues summarize(const ErrorReport& r) {
  using detail::format_value;
  static constexpr const char* kAxes[3] = {"roll", "pitch", "yaw"};
  KeyValues kv;
  for (int i = 0; i < 3; ++i) {
    kv.emplace_back(std::string(kAxes[i]) + "_mean_deg", format_value(r.angle_deg[i].mean));
    kv.emplace_back(std::string(kAxes[i]) + "_std_deg", format_value(r.angle_deg[i].std));
  }
  kv.emplace_back("drift_deg", format_value(r.drift_deg));
  if (r.hand_mm) {
    kv.emplace_back("hand_mean_mm", format_value(r.hand_mm->mean));
    kv.emplace_back("hand_std_mm", format_value(r.hand_mm->std));
  }
  kv.emplace_back("samples", std::to_string(r.series.size()));
  return kv;
}

inline ExperimentResult run_experiment(ExperimentKind kind, Algorithm algo, const PipelineConfig& cfg,
                                       std::uint64_t seed, const ExperimentInputs& inputs = {}) {
  cfg.validate();
  ExperimentResult res;
  KeyValues head{{"experiment", experiment_name(kind)},
                 {"algorithm", algorithm_name(algo)},
                 {"seed", std::to_string(seed)},
                 {"rate_hz", detail::format_value(cfg.rate_hz)}};
  std::mt19937_64 rng(seed ^ 0xa5a5a5a5ULL);

  if (kind == ExperimentKind::kTrack) {
    if (inputs.imu || inputs.truth) {
      throw Error(ErrorCode::kInvalidArgument, "track experiments run on the simulator; use the track command for logs");
    }
    const BodySpec spec = circles_preset(cfg.rate_hz, seed);
    std::array<Vec3, kSegmentCount> biases;
    for (auto& b : biases) b = random_bias(rng, cfg.sim.bias);
    const BodySimulation sim = generate_body(spec, cfg.body, simulation_noise(cfg), biases);
    const TrackingRun run = track_body(algo, sim.samples, cfg.body, sim.start_posture, cfg);
    const auto fr = static_cast<std::size_t>(Segment::kForearmRight);
    const TruthRecord truth = to_truth_record(sim.truth[fr], sim.hand_right);
    res.report = evaluate_attitude(run.t, run.segment_q[fr], truth, cfg.evaluation, run.hand_right);
    const ErrorStats left = hand_position_error_mm(run.hand_left, sim.hand_left);
    res.summary = head;
    for (auto& kv : summarize(res.report)) res.summary.push_back(kv);
    res.summary.emplace_back("left_hand_mean_mm", detail::format_value(left.mean));
    res.summary.emplace_back("left_hand_std_mm", detail::format_value(left.std));
    return res;
  }

  std::vector<ImuSample> samples;
  TruthRecord truth;
  if (inputs.imu) {
    if (!inputs.truth) throw Error(ErrorCode::kInvalidArgument, "recorded IMU input needs a truth file");
    samples = *inputs.imu;
    truth = *inputs.truth;
  } else {
    TrajectorySpec spec;
    Vec3 bias;
    if (kind == ExperimentKind::kDrift) {
      spec = drift_protocol(cfg.rate_hz, seed, 25.0, 10.0, cfg.sim.shake_rate, cfg.sim.shake_force);
      bias = Vec3::Constant(cfg.sim.drift_bias);
    } else {
      spec = dynamic_protocol(cfg.rate_hz, seed);
      bias = random_bias(rng, cfg.sim.bias);
    }
    Simulation sim = generate(spec, simulation_noise(cfg), bias);
    samples = std::move(sim.samples);
    truth = to_truth_record(sim.truth);
  }
  const FilterRun run = run_filter(algo, samples, cfg);
  res.report = evaluate_attitude(run.t, run.q, truth, cfg.evaluation);
  res.summary = head;
  for (auto& kv : summarize(res.report)) res.summary.push_back(kv);
  res.summary.emplace_back("corrections", std::to_string(run.corrections));
  return res;
}

/// Writes `<prefix>_summary.csv` (key,value) and `<prefix>_series.csv`.
inline void write_report(const std::string& prefix, const ExperimentResult& res) {
  {
    auto out = detail::open_out(prefix + "_summary.csv");
    out << "key,value\n";
    for (const auto& [k, v] : res.summary) out << k << ',' << v << '\n';
    if (!out) throw Error(ErrorCode::kIo, "write to '" + prefix + "_summary.csv' failed");
  }
  auto out = detail::open_out(prefix + "_series.csv");
  const bool hand = res.report.hand_mm.has_value();
  out << (hand ? "t,roll_deg,pitch_deg,yaw_deg,hand_mm\n" : "t,roll_deg,pitch_deg,yaw_deg\n");
  for (const auto& row : res.report.series) {
    out << detail::format_time(row.t) << ',' << detail::format_value(row.roll_deg) << ','
        << detail::format_value(row.pitch_deg) << ',' << detail::format_value(row.yaw_deg);
    if (hand) out << ',' << detail::format_value(row.hand_mm);
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::kIo, "write to '" + prefix + "_series.csv' failed");
}

}  // namespace imupose
