// imupose command-line front end.
//
//   imupose [--seed N] [--config FILE] [--rate 100|1000] <command> ...
//
// Exit status is 0 on success, 1 on command-line usage errors and the
// numeric ErrorCode of any library error otherwise.

#include "imupose/config.hpp"
#include "imupose/error.hpp"
#include "imupose/experiment.hpp"
#include "imupose/io.hpp"
#include "imupose/kinematics.hpp"
#include "imupose/metrics.hpp"
#include "imupose/sim.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

namespace {

using namespace imupose;

struct Globals {
  std::uint64_t seed{0};
  std::string config_path;
  double rate{0.0};
};

PipelineConfig load_config(const Globals& g) {
  PipelineConfig cfg = g.config_path.empty() ? PipelineConfig{} : read_config(g.config_path);
  if (g.rate > 0.0) cfg.rate_hz = g.rate;
  cfg.validate();
  return cfg;
}

Attitudes read_start_posture(const std::string& path) {
  auto in = detail::open_in(path);
  Attitudes att;
  std::array<bool, kSegmentCount> seen{};
  for (const auto& [key, value] : parse_key_values(in, path, ErrorCode::kInvalidConfig)) {
    bool known = false;
    for (std::size_t i = 0; i < kSegmentCount; ++i) {
      if (key != segment_name(kAllSegments[i])) continue;
      const auto v = parse_numbers(value, path + ": " + key, ErrorCode::kInvalidConfig);
      if (v.size() != 4) throw Error(ErrorCode::kInvalidConfig, path + ": " + key + " needs w x y z");
      att[i] = Quaternion{v[0], v[1], v[2], v[3]}.normalized();
      seen[i] = true;
      known = true;
    }
    if (!known) throw Error(ErrorCode::kInvalidConfig, path + ": unknown segment '" + key + "'");
  }
  for (std::size_t i = 0; i < kSegmentCount; ++i) {
    if (!seen[i]) throw Error(ErrorCode::kMissingAttitude, path + ": no start attitude for " + segment_name(kAllSegments[i]));
  }
  return att;
}

void write_start_posture(const std::string& path, const Attitudes& att) {
  auto out = detail::open_out(path);
  for (std::size_t i = 0; i < kSegmentCount; ++i) {
    const auto& q = att[i];
    out << segment_name(kAllSegments[i]) << " = " << detail::format_value(q.w) << ' ' << detail::format_value(q.x)
        << ' ' << detail::format_value(q.y) << ' ' << detail::format_value(q.z) << '\n';
  }
}

std::array<std::vector<ImuSample>, kSegmentCount> read_body_logs(const std::vector<std::string>& paths) {
  if (paths.size() != kSegmentCount) {
    throw Error(ErrorCode::kInvalidArgument, "expected five IMU logs in segment order: chest, upper_arm_left, "
                                             "forearm_left, upper_arm_right, forearm_right");
  }
  std::array<std::vector<ImuSample>, kSegmentCount> logs;
  for (std::size_t i = 0; i < kSegmentCount; ++i) logs[i] = read_imu_log(paths[i]).samples;
  return logs;
}

TruthRecord estimate_record(const std::vector<double>& t, const std::vector<Quaternion>& q,
                            const std::vector<Vec3>& p = {}) {
  TruthRecord r;
  r.t = t;
  r.q = q;
  r.position = p;
  return r;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"IMU attitude estimation and upper-limb tracking"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Random seed for simulation");
  app.add_option("--config", g.config_path, "key = value configuration file")->check(CLI::ExistingFile);
  app.add_option("--rate", g.rate, "Sample rate (Hz)")->check(CLI::IsMember({100.0, 1000.0}));

  // calibrate
  auto* cal = app.add_subcommand("calibrate", "Sensor noise/bias calibration, or link lengths with --links");
  std::vector<std::string> cal_imu;
  std::string cal_out, cal_start, cal_body;
  bool cal_links = false;
  cal->add_option("--imu", cal_imu, "IMU log(s)")->required();
  cal->add_option("--out", cal_out, "Output file")->required();
  cal->add_flag("--links", cal_links, "Refine link lengths from a hands-together recording");
  cal->add_option("--start", cal_start, "Start posture file (with --links)");
  cal->add_option("--body", cal_body, "Prior body model (with --links)");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Generate synthetic IMU logs and ground truth");
  std::string sim_kind = "drift", sim_prefix;
  sim->add_option("--kind", sim_kind, "drift | dynamic | static | circles")
      ->check(CLI::IsMember({"drift", "dynamic", "static", "circles"}));
  sim->add_option("--out", sim_prefix, "Output path prefix")->required();

  // filter
  auto* fil = app.add_subcommand("filter", "Estimate attitude from one IMU log");
  std::string fil_imu, fil_out, fil_algo = "smekf";
  fil->add_option("--imu", fil_imu, "IMU log")->required();
  fil->add_option("--algorithm", fil_algo, "smekf | ncf | gdc | predict")
      ->check(CLI::IsMember({"smekf", "ncf", "gdc", "predict"}));
  fil->add_option("--out", fil_out, "Estimate CSV (t,qw,qx,qy,qz)")->required();

  // track
  auto* trk = app.add_subcommand("track", "Reconstruct both arms from five IMU logs");
  std::vector<std::string> trk_imu;
  std::string trk_body, trk_start, trk_out, trk_algo = "smekf";
  trk->add_option("--imu", trk_imu, "Five IMU logs in segment order")->required()->expected(5);
  trk->add_option("--body", trk_body, "Body model file");
  trk->add_option("--start", trk_start, "Start posture file")->required();
  trk->add_option("--algorithm", trk_algo, "smekf | ncf | gdc | predict")
      ->check(CLI::IsMember({"smekf", "ncf", "gdc", "predict"}));
  trk->add_option("--out", trk_out, "Output prefix")->required();

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Compare an estimate file against ground truth");
  std::string ev_est, ev_truth, ev_out;
  ev->add_option("--estimate", ev_est, "Estimate CSV")->required();
  ev->add_option("--truth", ev_truth, "Ground-truth CSV")->required();
  ev->add_option("--out", ev_out, "Report prefix")->required();

  // experiment
  auto* ex = app.add_subcommand("experiment", "Run a full drift, dynamic or track experiment");
  std::string ex_kind = "drift", ex_algo = "smekf", ex_out, ex_imu, ex_truth;
  ex->add_option("--kind", ex_kind, "drift | dynamic | track")->check(CLI::IsMember({"drift", "dynamic", "track"}));
  ex->add_option("--algorithm", ex_algo, "smekf | ncf | gdc | predict")
      ->check(CLI::IsMember({"smekf", "ncf", "gdc", "predict"}));
  ex->add_option("--out", ex_out, "Report prefix")->required();
  ex->add_option("--imu", ex_imu, "Recorded IMU log instead of the simulator");
  ex->add_option("--truth", ex_truth, "Ground truth for --imu");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    const PipelineConfig cfg = load_config(g);

    if (*cal) {
      if (!cal_links) {
        if (cal_imu.size() != 1) throw Error(ErrorCode::kInvalidArgument, "sensor calibration takes one IMU log");
        const ImuLog log = read_imu_log(cal_imu.front());
        const SensorCalibration c = calibrate_stationary(calibration_span(log.samples, cfg.calibration_seconds));
        write_calibration(cal_out, c);
        return 0;
      }
      if (cal_start.empty()) throw Error(ErrorCode::kInvalidArgument, "--links needs --start");
      const BodyModel prior_model = cal_body.empty() ? cfg.body : read_body_model(cal_body);
      const TrackingRun run =
          track_body(Algorithm::kSmekf, read_body_logs(cal_imu), prior_model, read_start_posture(cal_start), cfg);
      std::vector<Attitudes> frames;
      for (std::size_t k = 0; k < run.t.size(); ++k) {
        Attitudes a;
        for (std::size_t i = 0; i < kSegmentCount; ++i) a[i] = run.segment_q[i][k];
        frames.push_back(a);
      }
      AnthropometricPriors priors;
      priors.lengths = prior_model.lengths;
      priors.tolerance = cfg.prior_tolerance;
      const LinkCalibration lc = calibrate_link_lengths(prior_model, priors, frames);
      write_body_model(cal_out, lc.model);
      if (lc.underexcited) throw Error(ErrorCode::kCalibrationUnderexcited, "recording does not excite every segment");
      if (lc.stalled) throw Error(ErrorCode::kOptimizerStalled, "link-length optimizer did not converge");
      return 0;
    }

    if (*sim) {
      const NoiseParams noise = simulation_noise(cfg);
      std::mt19937_64 rng(g.seed ^ 0xa5a5a5a5ULL);
      if (sim_kind == "circles") {
        const BodySpec spec = circles_preset(cfg.rate_hz, g.seed);
        std::array<Vec3, kSegmentCount> biases;
        for (auto& b : biases) b = random_bias(rng, cfg.sim.bias);
        const BodySimulation out = generate_body(spec, cfg.body, noise, biases);
        for (std::size_t i = 0; i < kSegmentCount; ++i) {
          const std::string name = segment_name(kAllSegments[i]);
          write_imu_log(sim_prefix + "_" + name + ".csv", {AccelUnits::kG, cfg.rate_hz, name}, out.samples[i]);
          const bool right = kAllSegments[i] == Segment::kForearmRight;
          const bool left = kAllSegments[i] == Segment::kForearmLeft;
          write_truth(sim_prefix + "_" + name + "_truth.csv",
                      to_truth_record(out.truth[i], right ? out.hand_right : left ? out.hand_left : std::vector<Vec3>{}));
        }
        write_start_posture(sim_prefix + "_start.txt", out.start_posture);
        write_body_model(sim_prefix + "_body.txt", cfg.body);
        return 0;
      }
      TrajectorySpec spec;
      Vec3 bias = random_bias(rng, cfg.sim.bias);
      if (sim_kind == "drift") {
        spec = drift_protocol(cfg.rate_hz, g.seed, 25.0, 10.0, cfg.sim.shake_rate, cfg.sim.shake_force);
        bias = Vec3::Constant(cfg.sim.drift_bias);
      } else if (sim_kind == "dynamic") {
        spec = dynamic_protocol(cfg.rate_hz, g.seed);
      } else {
        spec.sample_rate = cfg.rate_hz;
        spec.seed = g.seed;
        spec.duration = 10.0;
        spec.phases = {Phase::still(10.0)};
      }
      const Simulation out = generate(spec, noise, bias);
      write_imu_log(sim_prefix + "_imu.csv", {AccelUnits::kG, cfg.rate_hz, sim_kind}, out.samples);
      write_truth(sim_prefix + "_truth.csv", to_truth_record(out.truth));
      return 0;
    }

    if (*fil) {
      const ImuLog log = read_imu_log(fil_imu);
      const FilterRun run = run_filter(parse_algorithm(fil_algo), log.samples, cfg);
      write_truth(fil_out, estimate_record(run.t, run.q));
      return 0;
    }

    if (*trk) {
      const BodyModel model = trk_body.empty() ? cfg.body : read_body_model(trk_body);
      const TrackingRun run =
          track_body(parse_algorithm(trk_algo), read_body_logs(trk_imu), model, read_start_posture(trk_start), cfg);
      const auto fl = static_cast<std::size_t>(Segment::kForearmLeft);
      const auto fr = static_cast<std::size_t>(Segment::kForearmRight);
      write_truth(trk_out + "_forearm_left.csv", estimate_record(run.t, run.segment_q[fl], run.hand_left));
      write_truth(trk_out + "_forearm_right.csv", estimate_record(run.t, run.segment_q[fr], run.hand_right));
      return 0;
    }

    if (*ev) {
      const TruthRecord est = read_truth(ev_est);
      const TruthRecord truth = read_truth(ev_truth);
      ExperimentResult res;
      res.report = evaluate_attitude(est.t, est.q, truth, cfg.evaluation, est.position);
      res.summary = summarize(res.report);
      write_report(ev_out, res);
      return 0;
    }

    if (*ex) {
      ExperimentInputs inputs;
      if (!ex_imu.empty()) inputs.imu = read_imu_log(ex_imu).samples;
      if (!ex_truth.empty()) inputs.truth = read_truth(ex_truth);
      const ExperimentResult res = run_experiment(parse_experiment(ex_kind), parse_algorithm(ex_algo), cfg, g.seed, inputs);
      write_report(ex_out, res);
      for (const auto& [k, v] : res.summary) std::cout << k << ' ' << v << '\n';
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(ErrorCode::kInvalidArgument);
  }
  return 0;
}
