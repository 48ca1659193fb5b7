/**
 * @file io.hpp
 * @brief CSV logs: IMU samples, ground truth, sensor calibration, body model.
 *
 * IMU log layout:
 *
 *     #imupose-v1,<units>,<rate_hz>,<sensor_id>
 *     t,wx,wy,wz,ax,ay,az            (optional column line)
 *     0.000000000,0.001,...
 *
 * with <units> either `rad/s+g` or `rad/s+m/s2`. Values are written with 9
 * significant digits, timestamps with 9 decimals.
 */
#pragma once

#include "imupose/error.hpp"
#include "imupose/imu.hpp"
#include "imupose/kinematics.hpp"
#include "imupose/quat.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace imupose {

inline constexpr std::string_view kLogMagic = "#imupose-v1";
inline constexpr double kRateTolerance = 0.05;
inline constexpr double kTruthUnitTolerance = 1e-3;

enum class AccelUnits { kG, kMetersPerSecond2 };

inline const char* units_token(AccelUnits u) { return u == AccelUnits::kG ? "rad/s+g" : "rad/s+m/s2"; }

struct ImuLogHeader {
  AccelUnits units{AccelUnits::kG};
  double rate_hz{100.0};
  std::string sensor_id{"imu"};
};

struct ImuLog {
  ImuLogHeader header;
  std::vector<ImuSample> samples;
};

struct TruthRecord {
  std::vector<double> t;
  std::vector<Quaternion> q;
  std::vector<Vec3> position;  ///< empty when the file has no position columns

  std::size_t size() const { return t.size(); }
  bool has_position() const { return !position.empty(); }
};

namespace detail {

inline std::vector<std::string> split(std::string_view line, char sep = ',') {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    std::string field(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    const auto b = field.find_first_not_of(" \t\r");
    const auto e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : field.substr(b, e - b + 1));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::optional<double> parse_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) return std::nullopt;
  return v;
}

inline double field_as_double(const std::string& s, const std::string& where, ErrorCode code) {
  const auto v = parse_double(s);
  if (!v || !std::isfinite(*v)) throw Error(code, where + ": cannot parse '" + s + "' as a number");
  return *v;
}

inline std::string format_value(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline std::string format_time(double t) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9f", t);
  return buf;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path + "' for reading");
  return in;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot open '" + path + "' for writing");
  return out;
}

inline bool blank(const std::string& line) { return line.find_first_not_of(" \t\r") == std::string::npos; }

}  // namespace detail

inline ImuLogHeader parse_imu_header(const std::string& line) {
  const auto f = detail::split(line);
  if (f.size() != 4 || f[0] != kLogMagic) {
    throw Error(ErrorCode::kBadHeader, "expected '#imupose-v1,<units>,<rate_hz>,<sensor_id>', got '" + line + "'");
  }
  ImuLogHeader h;
  if (f[1] == "rad/s+g") {
    h.units = AccelUnits::kG;
  } else if (f[1] == "rad/s+m/s2") {
    h.units = AccelUnits::kMetersPerSecond2;
  } else {
    throw Error(ErrorCode::kBadHeader, "unknown units '" + f[1] + "'");
  }
  const auto rate = detail::parse_double(f[2]);
  if (!rate || !(*rate > 0.0) || !std::isfinite(*rate)) throw Error(ErrorCode::kBadHeader, "bad rate '" + f[2] + "'");
  h.rate_hz = *rate;
  if (f[3].empty()) throw Error(ErrorCode::kBadHeader, "empty sensor id");
  h.sensor_id = f[3];
  return h;
}

/// Checks monotone time, the declared rate and the accelerometer scale.
inline void validate_imu_log(const ImuLog& log) {
  const auto& s = log.samples;
  for (std::size_t i = 1; i < s.size(); ++i) {
    if (!(s[i].t > s[i - 1].t)) {
      throw Error(ErrorCode::kNonMonotoneTimestamps, "row " + std::to_string(i + 1) + ": t=" +
                                                         std::to_string(s[i].t) + " does not increase");
    }
  }
  if (s.size() >= 2) {
    const double observed = 1.0 / detail::median_dt(s);
    if (std::abs(observed - log.header.rate_hz) > kRateTolerance * log.header.rate_hz) {
      throw Error(ErrorCode::kBadHeader, "declared rate " + std::to_string(log.header.rate_hz) +
                                             " Hz, observed " + std::to_string(observed) + " Hz");
    }
  }
  if (!s.empty()) {
    std::vector<double> norms;
    norms.reserve(s.size());
    for (const auto& x : s) norms.push_back(x.accel.norm());
    auto mid = norms.begin() + static_cast<std::ptrdiff_t>(norms.size() / 2);
    std::nth_element(norms.begin(), mid, norms.end());
    if (*mid < 0.5 || *mid > 2.0) {
      throw Error(ErrorCode::kUnitMismatch, "median |accel| = " + std::to_string(*mid) +
                                                " g after conversion; check the units declaration");
    }
  }
}

inline ImuLog parse_imu_log(std::istream& in, const std::string& name = "<stream>") {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kBadHeader, name + ": empty file");
  ImuLog log;
  log.header = parse_imu_header(line);
  const double scale = log.header.units == AccelUnits::kMetersPerSecond2 ? 1.0 / kStandardGravity : 1.0;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (detail::blank(line)) continue;
    const auto f = detail::split(line);
    if (f[0] == "t") continue;  // column line
    const std::string where = name + ":" + std::to_string(row);
    if (f.size() != 7) throw Error(ErrorCode::kBadHeader, where + ": expected 7 columns");
    ImuSample s;
    s.t = detail::field_as_double(f[0], where, ErrorCode::kBadHeader);
    for (int i = 0; i < 3; ++i) {
      s.gyro(i) = detail::field_as_double(f[1 + i], where, ErrorCode::kBadHeader);
      s.accel(i) = detail::field_as_double(f[4 + i], where, ErrorCode::kBadHeader) * scale;
    }
    log.samples.push_back(s);
  }
  validate_imu_log(log);
  return log;
}

inline ImuLog read_imu_log(const std::string& path) {
  auto in = detail::open_in(path);
  return parse_imu_log(in, path);
}

/// Writes samples given in g, converting to the declared units.
inline void write_imu_log(std::ostream& out, const ImuLogHeader& header, const std::vector<ImuSample>& samples) {
  const double scale = header.units == AccelUnits::kMetersPerSecond2 ? kStandardGravity : 1.0;
  out << kLogMagic << ',' << units_token(header.units) << ',' << detail::format_value(header.rate_hz) << ','
      << header.sensor_id << '\n';
  out << "t,wx,wy,wz,ax,ay,az\n";
  for (const auto& s : samples) {
    out << detail::format_time(s.t);
    for (int i = 0; i < 3; ++i) out << ',' << detail::format_value(s.gyro(i));
    for (int i = 0; i < 3; ++i) out << ',' << detail::format_value(s.accel(i) * scale);
    out << '\n';
  }
}

inline void write_imu_log(const std::string& path, const ImuLogHeader& header, const std::vector<ImuSample>& samples) {
  auto out = detail::open_out(path);
  write_imu_log(out, header, samples);
  if (!out) throw Error(ErrorCode::kIo, "write to '" + path + "' failed");
}

inline TruthRecord parse_truth(std::istream& in, const std::string& name = "<stream>") {
  TruthRecord rec;
  std::string line;
  std::size_t row = 0;
  std::optional<std::size_t> columns;
  while (std::getline(in, line)) {
    ++row;
    if (detail::blank(line) || line[0] == '#') continue;
    const auto f = detail::split(line);
    if (f[0] == "t") continue;
    const std::string where = name + ":" + std::to_string(row);
    if (f.size() != 5 && f.size() != 8) throw Error(ErrorCode::kBadHeader, where + ": expected 5 or 8 columns");
    if (columns && *columns != f.size()) throw Error(ErrorCode::kBadHeader, where + ": column count changed");
    columns = f.size();
    const double t = detail::field_as_double(f[0], where, ErrorCode::kBadHeader);
    Quaternion q{detail::field_as_double(f[1], where, ErrorCode::kBadHeader),
                 detail::field_as_double(f[2], where, ErrorCode::kBadHeader),
                 detail::field_as_double(f[3], where, ErrorCode::kBadHeader),
                 detail::field_as_double(f[4], where, ErrorCode::kBadHeader)};
    if (std::abs(q.norm() - 1.0) > kTruthUnitTolerance) {
      throw Error(ErrorCode::kInvalidArgument, where + ": quaternion norm " + std::to_string(q.norm()));
    }
    if (!rec.t.empty() && !(t > rec.t.back())) {
      throw Error(ErrorCode::kNonMonotoneTimestamps, where + ": t=" + std::to_string(t) + " does not increase");
    }
    rec.t.push_back(t);
    rec.q.push_back(q.normalized());
    if (f.size() == 8) {
      rec.position.emplace_back(detail::field_as_double(f[5], where, ErrorCode::kBadHeader),
                                detail::field_as_double(f[6], where, ErrorCode::kBadHeader),
                                detail::field_as_double(f[7], where, ErrorCode::kBadHeader));
    }
  }
  return rec;
}

inline TruthRecord read_truth(const std::string& path) {
  auto in = detail::open_in(path);
  return parse_truth(in, path);
}

inline void write_truth(std::ostream& out, const TruthRecord& rec) {
  const bool pos = rec.has_position();
  out << (pos ? "t,qw,qx,qy,qz,px,py,pz\n" : "t,qw,qx,qy,qz\n");
  for (std::size_t i = 0; i < rec.size(); ++i) {
    const auto& q = rec.q[i];
    out << detail::format_time(rec.t[i]) << ',' << detail::format_value(q.w) << ',' << detail::format_value(q.x)
        << ',' << detail::format_value(q.y) << ',' << detail::format_value(q.z);
    if (pos) {
      for (int k = 0; k < 3; ++k) out << ',' << detail::format_value(rec.position[i](k));
    }
    out << '\n';
  }
}

inline void write_truth(const std::string& path, const TruthRecord& rec) {
  auto out = detail::open_out(path);
  write_truth(out, rec);
  if (!out) throw Error(ErrorCode::kIo, "write to '" + path + "' failed");
}

// ---------------------------------------------------------------------------
// key = value files (sensor calibration, body model, summaries)

using KeyValues = std::vector<std::pair<std::string, std::string>>;

inline KeyValues parse_key_values(std::istream& in, const std::string& name, ErrorCode code) {
  KeyValues kv;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (detail::blank(line)) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(code, name + ":" + std::to_string(row) + ": expected 'key = value'");
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    kv.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return kv;
}

inline std::vector<double> parse_numbers(const std::string& value, const std::string& where, ErrorCode code) {
  std::vector<double> out;
  std::istringstream ss(value);
  std::string tok;
  while (ss >> tok) out.push_back(detail::field_as_double(tok, where, code));
  return out;
}

inline void write_calibration(std::ostream& out, const SensorCalibration& c) {
  const auto vec = [](const auto& m, int n) {
    std::string s;
    for (int i = 0; i < n; ++i) s += (i ? " " : "") + detail::format_value(m(i));
    return s;
  };
  Eigen::Matrix<double, 9, 1> so = Eigen::Map<const Eigen::Matrix<double, 9, 1>>(c.sigma_omega_hat.data());
  Eigen::Matrix<double, 9, 1> sg = Eigen::Map<const Eigen::Matrix<double, 9, 1>>(c.sigma_g_hat.data());
  out << "sigma_omega = " << vec(so, 9) << '\n';
  out << "sigma_g = " << vec(sg, 9) << '\n';
  out << "bias0 = " << vec(c.bias0, 3) << '\n';
  out << "q0 = " << vec(c.q0.coeffs(), 4) << '\n';
  out << "mean_accel = " << vec(c.mean_accel, 3) << '\n';
  out << "sample_count = " << c.sample_count << '\n';
}

inline void write_calibration(const std::string& path, const SensorCalibration& c) {
  auto out = detail::open_out(path);
  write_calibration(out, c);
}

inline SensorCalibration read_calibration(const std::string& path) {
  auto in = detail::open_in(path);
  SensorCalibration c;
  for (const auto& [key, value] : parse_key_values(in, path, ErrorCode::kInvalidConfig)) {
    const auto v = parse_numbers(value, path + ": " + key, ErrorCode::kInvalidConfig);
    const auto need = [&](std::size_t n) {
      if (v.size() != n) throw Error(ErrorCode::kInvalidConfig, path + ": " + key + " needs " + std::to_string(n) + " values");
    };
    if (key == "sigma_omega") {
      need(9);
      c.sigma_omega_hat = Eigen::Map<const Mat3>(v.data());
    } else if (key == "sigma_g") {
      need(9);
      c.sigma_g_hat = Eigen::Map<const Mat3>(v.data());
    } else if (key == "bias0") {
      need(3);
      c.bias0 = Vec3(v[0], v[1], v[2]);
    } else if (key == "q0") {
      need(4);
      c.q0 = Quaternion{v[0], v[1], v[2], v[3]}.normalized();
    } else if (key == "mean_accel") {
      need(3);
      c.mean_accel = Vec3(v[0], v[1], v[2]);
    } else if (key == "sample_count") {
      need(1);
      c.sample_count = static_cast<std::size_t>(v[0]);
    } else {
      throw Error(ErrorCode::kInvalidConfig, path + ": unknown key '" + key + "'");
    }
  }
  return c;
}

/// Body model as `<link_name> = <meters>` lines plus `palm_offset = x y z`.
inline void write_body_model(std::ostream& out, const BodyModel& m) {
  for (std::size_t i = 0; i < kLinkCount; ++i) {
    out << link_name(static_cast<Link>(i)) << " = " << detail::format_value(m.lengths[i]) << '\n';
  }
  out << "palm_offset = " << detail::format_value(m.palm_offset_left.x()) << ' '
      << detail::format_value(m.palm_offset_left.y()) << ' ' << detail::format_value(m.palm_offset_left.z()) << '\n';
}

inline void write_body_model(const std::string& path, const BodyModel& m) {
  auto out = detail::open_out(path);
  write_body_model(out, m);
}

inline BodyModel parse_body_model(std::istream& in, const std::string& name) {
  BodyModel m;
  for (const auto& [key, value] : parse_key_values(in, name, ErrorCode::kInvalidConfig)) {
    const auto v = parse_numbers(value, name + ": " + key, ErrorCode::kInvalidConfig);
    bool known = false;
    for (std::size_t i = 0; i < kLinkCount; ++i) {
      if (key == link_name(static_cast<Link>(i))) {
        if (v.size() != 1) throw Error(ErrorCode::kInvalidConfig, name + ": " + key + " needs one value");
        m.lengths[i] = v[0];
        known = true;
      }
    }
    if (key == "palm_offset") {
      if (v.size() != 3) throw Error(ErrorCode::kInvalidConfig, name + ": palm_offset needs three values");
      m.palm_offset_left = Vec3(v[0], v[1], v[2]);
      known = true;
    }
    if (!known) throw Error(ErrorCode::kInvalidConfig, name + ": unknown key '" + key + "'");
  }
  m.validate();
  return m;
}

inline BodyModel read_body_model(const std::string& path) {
  auto in = detail::open_in(path);
  return parse_body_model(in, path);
}

}  // namespace imupose
