#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "pmsm/error.hpp"
#include "pmsm/random.hpp"

namespace pmsm {

inline constexpr std::string_view kProfileIdColumn = "profile_id";

/// The twelve continuous attributes of the benchmark file.
inline const std::vector<std::string>& benchmark_schema() {
  static const std::vector<std::string> names = {
      "stator_yoke", "stator_winding", "stator_tooth", "pm",      "u_q",     "coolant",
      "u_d",         "motor_speed",    "i_d",          "i_q",     "ambient", "torque"};
  return names;
}

/// Output order of the four-way regression head.
inline const std::array<std::string, 4>& target_names() {
  static const std::array<std::string, 4> names = {"stator_winding", "stator_tooth",
                                                    "stator_yoke", "pm"};
  return names;
}

/// Benchmark sampling period in seconds (2 Hz).
inline constexpr double kDefaultSamplePeriod = 0.5;

using WarningSink = std::function<void(const std::string&)>;

inline void warn_stderr(const std::string& msg) { std::cerr << "warning: " << msg << '\n'; }

/// One measurement session: equal-length named series.
struct ProfileFrame {
  int profile_id = 0;
  double sample_period = kDefaultSamplePeriod;
  std::vector<std::string> names;
  std::vector<std::vector<double>> series;

  std::size_t length() const { return series.empty() ? 0 : series.front().size(); }

  bool has(std::string_view name) const {
    return std::find(names.begin(), names.end(), name) != names.end();
  }

  const std::vector<double>& column(std::string_view name) const {
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) {
      throw SchemaError("profile " + std::to_string(profile_id) + " has no attribute '" +
                        std::string(name) + "'");
    }
    return series[static_cast<std::size_t>(it - names.begin())];
  }

  /// Replaces an existing column or appends a new one.
  void set(const std::string& name, std::vector<double> values) {
    if (!series.empty() && values.size() != length()) {
      throw ShapeError("column '" + name + "' has length " + std::to_string(values.size()) +
                       ", frame length is " + std::to_string(length()));
    }
    auto it = std::find(names.begin(), names.end(), name);
    if (it != names.end()) {
      series[static_cast<std::size_t>(it - names.begin())] = std::move(values);
    } else {
      names.push_back(name);
      series.push_back(std::move(values));
    }
  }

  friend bool operator==(const ProfileFrame&, const ProfileFrame&) = default;
};

struct DatasetSplit {
  std::vector<ProfileFrame> train;
  std::vector<ProfileFrame> test;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

inline bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace detail

/// Reads a comma-separated file with a header row. One frame per distinct profile_id,
/// in order of first appearance; rows keep file order. Columns outside `schema` are
/// dropped with a warning.
inline std::vector<ProfileFrame> load_csv(const std::string& path,
                                          const std::vector<std::string>& schema =
                                              benchmark_schema(),
                                          const WarningSink& warn = warn_stderr) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": empty file, header row required");
  const auto header = detail::split_commas(line);

  std::vector<std::string> missing;
  std::vector<std::size_t> schema_pos(schema.size());
  for (std::size_t s = 0; s < schema.size(); ++s) {
    auto it = std::find(header.begin(), header.end(), schema[s]);
    if (it == header.end())
      missing.push_back(schema[s]);
    else
      schema_pos[s] = static_cast<std::size_t>(it - header.begin());
  }
  auto pid_it = std::find(header.begin(), header.end(), kProfileIdColumn);
  if (pid_it == header.end()) missing.emplace_back(kProfileIdColumn);
  if (!missing.empty()) {
    std::string msg = path + ": missing column(s):";
    for (const auto& m : missing) msg += " " + m;
    throw SchemaError(msg);
  }
  const auto pid_pos = static_cast<std::size_t>(pid_it - header.begin());
  for (std::size_t h = 0; h < header.size(); ++h) {
    if (h == pid_pos) continue;
    if (std::find(schema.begin(), schema.end(), header[h]) == schema.end())
      warn(path + ": ignoring non-schema column '" + std::string(header[h]) + "'");
  }

  std::vector<ProfileFrame> frames;
  std::map<int, std::size_t> index_of;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_commas(line);
    if (cells.size() != header.size()) {
      throw ParseError(path + ": row " + std::to_string(line_no) + " has " +
                       std::to_string(cells.size()) + " cells, header has " +
                       std::to_string(header.size()));
    }
    double pid_value = 0.0;
    if (!detail::parse_double(cells[pid_pos], pid_value) || pid_value != std::floor(pid_value)) {
      throw ParseError(path + ": row " + std::to_string(line_no) + ": bad profile_id '" +
                       std::string(cells[pid_pos]) + "'");
    }
    const int pid = static_cast<int>(pid_value);
    auto [it, inserted] = index_of.try_emplace(pid, frames.size());
    if (inserted) {
      ProfileFrame f;
      f.profile_id = pid;
      f.names = schema;
      f.series.resize(schema.size());
      frames.push_back(std::move(f));
    }
    ProfileFrame& frame = frames[it->second];
    for (std::size_t s = 0; s < schema.size(); ++s) {
      double v = 0.0;
      if (!detail::parse_double(cells[schema_pos[s]], v)) {
        throw ParseError(path + ": row " + std::to_string(line_no) + ", column '" + schema[s] +
                         "': not a finite number: '" + std::string(cells[schema_pos[s]]) + "'");
      }
      frame.series[s].push_back(v);
    }
  }
  return frames;
}

/// Writes frames back in the load_csv layout (frame columns then profile_id).
/// Values use shortest round-trip formatting, so a reload is exact.
inline void write_csv(std::span<const ProfileFrame> frames, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  if (frames.empty()) return;
  const auto& names = frames.front().names;
  for (const auto& n : names) out << n << ',';
  out << kProfileIdColumn << '\n';
  for (const auto& f : frames) {
    if (f.names != names) throw SchemaError("write_csv: frames disagree on column layout");
    for (std::size_t t = 0; t < f.length(); ++t) {
      for (const auto& s : f.series) out << detail::format_double(s[t]) << ',';
      out << f.profile_id << '\n';
    }
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

/// Partitions frames into train/test by profile id. Order within each side follows input.
inline DatasetSplit split(std::vector<ProfileFrame> frames, const std::set<int>& test_ids) {
  std::set<int> present;
  for (const auto& f : frames) present.insert(f.profile_id);
  for (int id : test_ids) {
    if (!present.count(id))
      throw ConfigError("test profile " + std::to_string(id) + " is not present in the data");
  }
  DatasetSplit s;
  for (auto& f : frames) (test_ids.count(f.profile_id) ? s.test : s.train).push_back(std::move(f));
  return s;
}

namespace detail {

/// Piecewise-constant setpoint with random hold durations, followed by a first-order ramp.
inline std::vector<double> setpoint_trace(Rng& rng, std::size_t length, double lo, double hi,
                                          double min_hold, double max_hold, double ramp) {
  std::vector<double> out(length);
  double target = rng.uniform(lo, hi);
  double value = target;
  double hold = rng.uniform(min_hold, max_hold);
  for (std::size_t t = 0; t < length; ++t) {
    if (hold <= 0.0) {
      target = rng.uniform(lo, hi);
      hold = rng.uniform(min_hold, max_hold);
    }
    hold -= 1.0;
    value += (target - value) / ramp;
    out[t] = value;
  }
  return out;
}

}  // namespace detail

/// Deterministic PMSM-like sessions for tests and desk runs. Temperatures are
/// first-order lag responses to copper and iron losses on top of the coolant
/// temperature; the magnet channel has the slowest time constant and is heated
/// partly through the winding, so it lags the stator.
inline std::vector<ProfileFrame> synthesize(std::uint64_t seed, std::size_t profiles,
                                            std::size_t length) {
  if (profiles < 1 || length < 1) throw ConfigError("synthesize: profiles and length must be >= 1");
  std::vector<ProfileFrame> frames;
  frames.reserve(profiles);
  for (std::size_t p = 0; p < profiles; ++p) {
    Rng rng(derive_seed(seed, p));
    const std::size_t n = length;

    std::vector<double> ambient(n), coolant(n);
    const double amb0 = rng.uniform(20.0, 28.0);
    const double cool0 = rng.uniform(18.0, 60.0);
    double amb_drift = 0.0, cool_drift = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      amb_drift = 0.995 * amb_drift + 0.02 * rng.normal();
      cool_drift = 0.998 * cool_drift + 0.05 * rng.normal();
      ambient[t] = amb0 + amb_drift;
      coolant[t] = cool0 + cool_drift;
    }
    const auto speed = detail::setpoint_trace(rng, n, 0.0, 6000.0, 40.0, 160.0, 8.0);
    const auto torque_cmd = detail::setpoint_trace(rng, n, -40.0, 160.0, 30.0, 120.0, 4.0);

    std::vector<double> i_d(n), i_q(n), u_d(n), u_q(n), torque(n);
    for (std::size_t t = 0; t < n; ++t) {
      const double w = speed[t] / 6000.0;
      i_q[t] = 1.1 * torque_cmd[t] + 0.5 * rng.normal();
      i_d[t] = -120.0 * w * w - 0.2 * std::abs(i_q[t]) + 0.5 * rng.normal();
      u_q[t] = 0.018 * speed[t] + 0.04 * i_q[t] + 0.3 * i_d[t] * w + 0.2 * rng.normal();
      u_d[t] = -0.25 * i_q[t] * w + 0.03 * i_d[t] + 0.2 * rng.normal();
      torque[t] = 0.9 * i_q[t] + 0.01 * i_d[t] * i_q[t] / 100.0 + 0.3 * rng.normal();
    }

    // Thermal lags, in samples.
    constexpr double tau_winding = 40.0, tau_tooth = 60.0, tau_yoke = 90.0, tau_pm = 220.0;
    std::vector<double> winding(n), tooth(n), yoke(n), pm(n);
    double yw = coolant[0] + 2.0, yt = coolant[0] + 1.5, yy = coolant[0] + 1.0,
           yp = coolant[0] + 3.0;
    for (std::size_t t = 0; t < n; ++t) {
      const double current_sq = i_d[t] * i_d[t] + i_q[t] * i_q[t];
      const double copper = 0.0015 * current_sq;
      const double iron = 6.0 * (speed[t] / 3000.0) * (speed[t] / 3000.0);
      const double amb_leak = 0.05 * (ambient[t] - coolant[t]);
      yw += (coolant[t] + 1.0 * copper + 0.4 * iron + amb_leak - yw) / tau_winding;
      yt += (coolant[t] + 0.7 * copper + 0.5 * iron + amb_leak - yt) / tau_tooth;
      yy += (coolant[t] + 0.35 * copper + 0.45 * iron + amb_leak - yy) / tau_yoke;
      yp += (0.55 * yw + 0.45 * coolant[t] + 0.6 * iron + 2.0 * amb_leak - yp) / tau_pm;
      winding[t] = yw + 0.05 * rng.normal();
      tooth[t] = yt + 0.05 * rng.normal();
      yoke[t] = yy + 0.05 * rng.normal();
      pm[t] = yp + 0.05 * rng.normal();
    }

    ProfileFrame f;
    f.profile_id = static_cast<int>(p + 1);
    f.names = benchmark_schema();
    f.series = {yoke, winding, tooth, pm, u_q, coolant, u_d, speed, i_d, i_q, ambient, torque};
    frames.push_back(std::move(f));
  }
  return frames;
}

}  // namespace pmsm
