#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pmsm/dataio.hpp"
#include "pmsm/error.hpp"
#include "pmsm/matrix.hpp"

namespace pmsm {

/// Derived interaction attributes built from the dq-frame quantities.
enum class Synthetic { U, I, S, P, IMM, SMM, IMC, SMC };

inline std::string_view name_of(Synthetic s) {
  switch (s) {
    case Synthetic::U: return "U";
    case Synthetic::I: return "I";
    case Synthetic::S: return "S";
    case Synthetic::P: return "P";
    case Synthetic::IMM: return "IMM";
    case Synthetic::SMM: return "SMM";
    case Synthetic::IMC: return "IMC";
    case Synthetic::SMC: return "SMC";
  }
  return "?";
}

/// "imc-smc" (default), "imm-smm" or "all".
inline std::vector<Synthetic> parse_synthetic_set(std::string_view name) {
  using enum Synthetic;
  if (name == "imc-smc") return {U, I, S, P, IMC, SMC};
  if (name == "imm-smm") return {U, I, S, P, IMM, SMM};
  if (name == "all") return {U, I, S, P, IMM, SMM, IMC, SMC};
  throw ConfigError("unknown synthetic set '" + std::string(name) +
                    "' (expected imm-smm, imc-smc or all)");
}

inline std::string synthetic_set_name(const std::vector<Synthetic>& set) {
  for (const char* n : {"imc-smc", "imm-smm", "all"})
    if (parse_synthetic_set(n) == set) return n;
  std::string out;
  for (auto s : set) out += (out.empty() ? "" : "+") + std::string(name_of(s));
  return out;
}

struct FeatureConfig {
  std::vector<std::string> predictors = {"ambient", "coolant", "u_d",        "u_q",
                                         "i_d",     "i_q",     "motor_speed"};
  std::vector<Synthetic> synthetic = parse_synthetic_set("imc-smc");
  std::vector<std::size_t> spans = {1320, 3360, 6360, 9480};
  bool include_raw = true;
  std::size_t window = 180;
  std::size_t stride = 1;
  bool standardize_targets = true;

  void validate() const {
    for (std::size_t i = 0; i < spans.size(); ++i) {
      if (spans[i] == 0) throw ConfigError("EWMA spans must be positive");
      if (i > 0 && spans[i] <= spans[i - 1])
        throw ConfigError("EWMA spans must be strictly increasing");
    }
    if (window == 0) throw ConfigError("window length must be >= 1");
    if (stride == 0) throw ConfigError("stride must be >= 1");
    if (!include_raw && spans.empty()) throw ConfigError("no channels: raw disabled and no spans");
  }

  std::vector<std::string> attribute_names() const {
    std::vector<std::string> names = predictors;
    for (auto s : synthetic) names.emplace_back(name_of(s));
    return names;
  }

  std::size_t channel_count() const {
    return attribute_names().size() * ((include_raw ? 1 : 0) + spans.size());
  }

  /// Raw block first, then one block per span; attribute order inside each block.
  std::vector<std::string> channel_names() const {
    const auto attrs = attribute_names();
    std::vector<std::string> out;
    if (include_raw) out = attrs;
    for (auto s : spans)
      for (const auto& a : attrs) out.push_back(a + "_ewma" + std::to_string(s));
    return out;
  }
};

/// Mean over the targets of |Pearson r| between `candidate` and each target, pooled over
/// the concatenation of all frames.
inline double avg_abs_correlation(std::span<const ProfileFrame> frames,
                                  std::string_view candidate,
                                  std::span<const std::string> targets) {
  auto pooled = [&](std::string_view name) {
    std::vector<double> v;
    for (const auto& f : frames) {
      const auto& c = f.column(name);
      v.insert(v.end(), c.begin(), c.end());
    }
    return v;
  };
  auto centered = [](std::vector<double> v, std::string_view name) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double& x : v) {
      x -= mean;
      ss += x * x;
    }
    if (v.empty() || ss <= 0.0)
      throw UndefinedCorrelation("correlation undefined: '" + std::string(name) +
                                 "' has zero variance");
    return std::pair{std::move(v), std::sqrt(ss)};
  };

  const auto [x, sx] = centered(pooled(candidate), candidate);
  double total = 0.0;
  for (const auto& t : targets) {
    const auto [y, sy] = centered(pooled(t), t);
    double cov = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) cov += x[i] * y[i];
    total += std::abs(cov / (sx * sy));
  }
  return total / static_cast<double>(targets.size());
}

/// Appends the selected interaction attributes:
///   U = |u_dq|, I = |i_dq|, S = U I, P = u_d i_d + u_q i_q,
///   IMM = I w, SMM = S w, IMC = I coolant, SMC = S coolant.
inline ProfileFrame derive_synthetic(ProfileFrame frame, std::span<const Synthetic> selection) {
  const std::size_t n = frame.length();
  const auto& ud = frame.column("u_d");
  const auto& uq = frame.column("u_q");
  const auto& id = frame.column("i_d");
  const auto& iq = frame.column("i_q");

  std::vector<double> U(n), I(n), S(n), P(n);
  for (std::size_t t = 0; t < n; ++t) {
    U[t] = std::sqrt(ud[t] * ud[t] + uq[t] * uq[t]);
    I[t] = std::sqrt(id[t] * id[t] + iq[t] * iq[t]);
    S[t] = U[t] * I[t];
    P[t] = ud[t] * id[t] + uq[t] * iq[t];
  }
  auto times = [n](const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> out(n);
    for (std::size_t t = 0; t < n; ++t) out[t] = a[t] * b[t];
    return out;
  };

  std::vector<std::pair<std::string, std::vector<double>>> added;
  for (auto s : selection) {
    switch (s) {
      case Synthetic::U: added.emplace_back("U", U); break;
      case Synthetic::I: added.emplace_back("I", I); break;
      case Synthetic::S: added.emplace_back("S", S); break;
      case Synthetic::P: added.emplace_back("P", P); break;
      case Synthetic::IMM: added.emplace_back("IMM", times(I, frame.column("motor_speed"))); break;
      case Synthetic::SMM: added.emplace_back("SMM", times(S, frame.column("motor_speed"))); break;
      case Synthetic::IMC: added.emplace_back("IMC", times(I, frame.column("coolant"))); break;
      case Synthetic::SMC: added.emplace_back("SMC", times(S, frame.column("coolant"))); break;
    }
  }
  for (auto& [name, values] : added) frame.set(name, std::move(values));
  return frame;
}

/// Adjusted (finite-history) exponentially weighted mean:
///   y_t = sum_i w_i x_{t-i} / sum_i w_i,  w_i = (1 - a)^i,  a = 2 / (span + 1).
/// Evaluated with the numerator/denominator recurrences.
inline std::vector<double> ewma(std::span<const double> x, std::size_t span) {
  if (span < 1) throw ConfigError("ewma: span must be >= 1");
  const double decay = 1.0 - 2.0 / (static_cast<double>(span) + 1.0);
  std::vector<double> y(x.size());
  double num = 0.0, den = 0.0;
  for (std::size_t t = 0; t < x.size(); ++t) {
    num = x[t] + decay * num;
    den = 1.0 + decay * den;
    y[t] = num / den;
  }
  return y;
}

/// Per-profile model channels (length x C) and raw targets (length x 4).
struct ChannelFrame {
  int profile_id = 0;
  Matrix features;
  Matrix targets;

  std::size_t length() const { return features.rows(); }
};

/// Synthetic attributes, raw block and EWMA blocks for one profile.
/// Smoothing restarts at every profile.
inline ChannelFrame build_channels(const ProfileFrame& frame, const FeatureConfig& config) {
  config.validate();
  const ProfileFrame aug = derive_synthetic(frame, config.synthetic);
  const auto attrs = config.attribute_names();
  const std::size_t n = aug.length();

  std::vector<const std::vector<double>*> cols;
  for (const auto& a : attrs) cols.push_back(&aug.column(a));

  ChannelFrame out;
  out.profile_id = frame.profile_id;
  out.features = Matrix(n, config.channel_count());
  std::size_t c = 0;
  if (config.include_raw) {
    for (const auto* col : cols) {
      for (std::size_t t = 0; t < n; ++t) out.features(t, c) = (*col)[t];
      ++c;
    }
  }
  for (auto s : config.spans) {
    for (const auto* col : cols) {
      const auto sm = ewma(*col, s);
      for (std::size_t t = 0; t < n; ++t) out.features(t, c) = sm[t];
      ++c;
    }
  }

  out.targets = Matrix(n, 4);
  for (std::size_t k = 0; k < 4; ++k) {
    const auto& tc = aug.column(target_names()[k]);
    for (std::size_t t = 0; t < n; ++t) out.targets(t, k) = tc[t];
  }
  return out;
}

struct StandardizationStats {
  std::vector<double> channel_mean;
  std::vector<double> channel_std;
  std::array<double, 4> target_mean{0, 0, 0, 0};
  std::array<double, 4> target_std{1, 1, 1, 1};
  bool standardize_targets = true;

  friend bool operator==(const StandardizationStats&, const StandardizationStats&) = default;
};

inline constexpr double kStdFloor = 1e-8;

namespace detail {

inline void column_moments(std::span<const ChannelFrame> frames, bool targets,
                           std::vector<double>& mean, std::vector<double>& stddev) {
  const std::size_t cols =
      frames.empty() ? 0 : (targets ? frames[0].targets.cols() : frames[0].features.cols());
  mean.assign(cols, 0.0);
  stddev.assign(cols, 0.0);
  std::size_t count = 0;
  for (const auto& f : frames) {
    const Matrix& m = targets ? f.targets : f.features;
    for (std::size_t t = 0; t < m.rows(); ++t)
      for (std::size_t c = 0; c < cols; ++c) mean[c] += m(t, c);
    count += m.rows();
  }
  if (count == 0) throw ConfigError("standardize: no samples to fit statistics on");
  for (double& v : mean) v /= static_cast<double>(count);
  for (const auto& f : frames) {
    const Matrix& m = targets ? f.targets : f.features;
    for (std::size_t t = 0; t < m.rows(); ++t)
      for (std::size_t c = 0; c < cols; ++c) {
        const double d = m(t, c) - mean[c];
        stddev[c] += d * d;
      }
  }
  for (double& v : stddev) v = std::max(std::sqrt(v / static_cast<double>(count)), kStdFloor);
}

}  // namespace detail

/// Population mean/std per channel and per target, from training frames only.
inline StandardizationStats fit_standardization(std::span<const ChannelFrame> train,
                                                bool standardize_targets = true) {
  StandardizationStats s;
  s.standardize_targets = standardize_targets;
  detail::column_moments(train, false, s.channel_mean, s.channel_std);
  std::vector<double> tm, ts;
  detail::column_moments(train, true, tm, ts);
  std::copy(tm.begin(), tm.end(), s.target_mean.begin());
  std::copy(ts.begin(), ts.end(), s.target_std.begin());
  return s;
}

/// Standardizes input channels in place. Targets stay in physical units.
inline void apply_standardization(ChannelFrame& frame, const StandardizationStats& stats) {
  if (stats.channel_mean.size() != frame.features.cols()) {
    throw ShapeError("standardization stats cover " + std::to_string(stats.channel_mean.size()) +
                     " channels, frame has " + std::to_string(frame.features.cols()));
  }
  for (std::size_t t = 0; t < frame.features.rows(); ++t)
    for (std::size_t c = 0; c < frame.features.cols(); ++c)
      frame.features(t, c) = (frame.features(t, c) - stats.channel_mean[c]) / stats.channel_std[c];
}

/// Fits on `frames` and transforms them.
inline StandardizationStats standardize(std::vector<ChannelFrame>& frames,
                                        bool standardize_targets = true) {
  auto stats = fit_standardization(frames, standardize_targets);
  for (auto& f : frames) apply_standardization(f, stats);
  return stats;
}

/// Maps physical-unit targets into the units the model is trained in, and back.
inline double to_model_units(const StandardizationStats& s, std::size_t k, double v) {
  return s.standardize_targets ? (v - s.target_mean[k]) / s.target_std[k] : v;
}
inline double to_physical_units(const StandardizationStats& s, std::size_t k, double v) {
  return s.standardize_targets ? v * s.target_std[k] + s.target_mean[k] : v;
}

/// Window provenance: which profile and which final sample.
struct WindowRef {
  int profile_id = 0;
  std::size_t frame_index = 0;
  std::size_t end = 0;  // inclusive
};

/// A batch in time-major layout: steps[t] is (batch x channels); targets (batch x 4)
/// in physical units.
struct SequenceBatch {
  std::vector<Matrix> steps;
  Matrix targets;

  std::size_t batch() const { return targets.rows(); }
};

/// Windowed view over per-profile channel matrices. Logically (windows, length,
/// channels) plus (windows, 1, 4) targets; windows are materialized on gather.
class FeatureTensor {
public:
  FeatureTensor() = default;
  FeatureTensor(std::vector<ChannelFrame> frames, std::vector<WindowRef> windows,
                std::size_t window_length)
      : frames_(std::move(frames)), windows_(std::move(windows)), length_(window_length) {}

  std::size_t size() const noexcept { return windows_.size(); }
  bool empty() const noexcept { return windows_.empty(); }
  std::size_t window_length() const noexcept { return length_; }
  std::size_t channels() const {
    return frames_.empty() ? 0 : frames_.front().features.cols();
  }
  const std::vector<WindowRef>& windows() const noexcept { return windows_; }
  const std::vector<ChannelFrame>& frames() const noexcept { return frames_; }

  /// (window_length x channels) slice for window i.
  Matrix window_inputs(std::size_t i) const {
    const WindowRef& w = windows_.at(i);
    const Matrix& f = frames_[w.frame_index].features;
    const std::size_t start = w.end + 1 - length_;
    Matrix out(length_, f.cols());
    std::copy_n(f.data() + start * f.cols(), length_ * f.cols(), out.data());
    return out;
  }

  std::array<double, 4> target(std::size_t i) const {
    const WindowRef& w = windows_.at(i);
    const auto r = frames_[w.frame_index].targets.row(w.end);
    return {r[0], r[1], r[2], r[3]};
  }

  SequenceBatch gather(std::span<const std::size_t> indices) const {
    SequenceBatch b;
    const std::size_t c = channels();
    b.steps.assign(length_, Matrix(indices.size(), c));
    b.targets = Matrix(indices.size(), 4);
    for (std::size_t r = 0; r < indices.size(); ++r) {
      const WindowRef& w = windows_.at(indices[r]);
      const ChannelFrame& f = frames_[w.frame_index];
      const std::size_t start = w.end + 1 - length_;
      for (std::size_t t = 0; t < length_; ++t)
        std::copy_n(f.features.data() + (start + t) * c, c, b.steps[t].data() + r * c);
      for (std::size_t k = 0; k < 4; ++k) b.targets(r, k) = f.targets(w.end, k);
    }
    return b;
  }

  SequenceBatch gather_range(std::size_t begin, std::size_t end) const {
    std::vector<std::size_t> idx(end - begin);
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = begin + i;
    return gather(idx);
  }

private:
  std::vector<ChannelFrame> frames_;
  std::vector<WindowRef> windows_;
  std::size_t length_ = 0;
};

/// Sliding windows per profile; the target is the raw measurement at the window's last
/// sample. Frames shorter than the window are skipped with a warning.
inline FeatureTensor windowize(std::vector<ChannelFrame> frames, const FeatureConfig& config,
                               const WarningSink& warn = warn_stderr) {
  config.validate();
  std::vector<ChannelFrame> kept;
  std::vector<WindowRef> windows;
  for (auto& f : frames) {
    if (f.length() < config.window) {
      warn("profile " + std::to_string(f.profile_id) + " has " + std::to_string(f.length()) +
           " samples, shorter than the window of " + std::to_string(config.window) +
           "; skipped");
      continue;
    }
    const std::size_t fi = kept.size();
    for (std::size_t end = config.window - 1; end < f.length(); end += config.stride)
      windows.push_back({f.profile_id, fi, end});
    kept.push_back(std::move(f));
  }
  return FeatureTensor(std::move(kept), std::move(windows), config.window);
}

}  // namespace pmsm
