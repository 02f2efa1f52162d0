#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "pmsm/dataio.hpp"
#include "pmsm/error.hpp"
#include "pmsm/features.hpp"
#include "pmsm/matrix.hpp"
#include "pmsm/models.hpp"

namespace pmsm {

/// Per-target and pooled metrics in physical units. `max_abs` is the worst-case absolute
/// error (the "MAE" of the thermal-estimation literature is a maximum, not a mean).
struct EvalReport {
  std::array<double, 4> mse{};
  std::array<double, 4> max_abs{};
  double overall_mse = 0.0;
  double overall_max_abs = 0.0;
  std::size_t samples = 0;
  double inference_ms = std::numeric_limits<double>::quiet_NaN();
};

/// Metrics from (N x 4) predictions and actuals.
inline EvalReport compute_metrics(const Matrix& predicted, const Matrix& actual) {
  Matrix::require_same_shape(predicted, actual, "compute_metrics");
  if (actual.rows() == 0) throw EvaluationError("no samples to evaluate");
  if (actual.cols() != 4) throw ShapeError("compute_metrics: expected 4 target columns");
  EvalReport r;
  r.samples = actual.rows();
  double pooled = 0.0;
  for (std::size_t k = 0; k < 4; ++k) {
    double sq = 0.0, mx = 0.0;
    for (std::size_t i = 0; i < actual.rows(); ++i) {
      const double e = actual(i, k) - predicted(i, k);
      sq += e * e;
      mx = std::max(mx, std::abs(e));
    }
    pooled += sq;
    r.mse[k] = sq / static_cast<double>(r.samples);
    r.max_abs[k] = mx;
  }
  r.overall_mse = pooled / static_cast<double>(4 * r.samples);
  r.overall_max_abs = *std::max_element(r.max_abs.begin(), r.max_abs.end());
  return r;
}

/// Physical-unit predictions (N x 4) in tensor window order.
inline Matrix predict(const ModelParams& params, const FeatureTensor& data,
                      const StandardizationStats& stats, std::size_t batch = 256) {
  Matrix out(data.size(), 4);
  for (std::size_t start = 0; start < data.size(); start += batch) {
    const std::size_t end = std::min(start + batch, data.size());
    const SequenceBatch b = data.gather_range(start, end);
    const Matrix y = forward(params, b.steps);
    for (std::size_t r = 0; r < y.rows(); ++r)
      for (std::size_t k = 0; k < 4; ++k) out(start + r, k) = to_physical_units(stats, k, y(r, k));
  }
  return out;
}

inline Matrix actual_targets(const FeatureTensor& data) {
  Matrix out(data.size(), 4);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto t = data.target(i);
    for (std::size_t k = 0; k < 4; ++k) out(i, k) = t[k];
  }
  return out;
}

inline EvalReport evaluate(const ModelParams& params, const FeatureTensor& data,
                           const StandardizationStats& stats) {
  if (data.empty()) throw EvaluationError("evaluate: empty test tensor");
  return compute_metrics(predict(params, data, stats), actual_targets(data));
}

/// Mean wall-clock milliseconds per forward pass over `steps`, after two warm-up runs.
inline double time_inference(const ModelParams& params, std::span<const Matrix> steps,
                             std::size_t repetitions) {
  if (repetitions < 10) throw ContractError("time_inference: repetitions must be >= 10");
  volatile double sink = 0.0;
  for (int w = 0; w < 2; ++w) sink = sink + forward(params, steps)(0, 0);
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t r = 0; r < repetitions; ++r) sink = sink + forward(params, steps)(0, 0);
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() /
         static_cast<double>(repetitions);
}

/// Window indices sorted by (profile id, end sample).
inline std::vector<std::size_t> provenance_order(const FeatureTensor& data) {
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const auto& w = data.windows();
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return std::pair(w[a].profile_id, w[a].end) < std::pair(w[b].profile_id, w[b].end);
  });
  return idx;
}

namespace detail {

inline std::ofstream open_for_write(const std::filesystem::path& p) {
  std::ofstream out(p);
  if (!out) throw IoError("cannot write '" + p.string() + "'");
  out << std::setprecision(17);
  return out;
}

}  // namespace detail

/// Per target: <name>_prediction.csv (sample, actual, predicted) and <name>_error.csv
/// (sample, error = actual - predicted). Returns the written paths.
inline std::vector<std::filesystem::path> emit_traces(const ModelParams& params,
                                                      const FeatureTensor& data,
                                                      const StandardizationStats& stats,
                                                      const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create '" + out_dir.string() + "': " + ec.message());
  const Matrix pred = predict(params, data, stats);
  const Matrix act = actual_targets(data);
  const auto order = provenance_order(data);

  std::vector<std::filesystem::path> written;
  for (std::size_t k = 0; k < 4; ++k) {
    const auto& name = target_names()[k];
    const auto pp = out_dir / (name + "_prediction.csv");
    const auto ep = out_dir / (name + "_error.csv");
    auto po = detail::open_for_write(pp);
    auto eo = detail::open_for_write(ep);
    po << "sample,actual,predicted\n";
    eo << "sample,error\n";
    for (std::size_t s = 0; s < order.size(); ++s) {
      const std::size_t i = order[s];
      po << s << ',' << act(i, k) << ',' << pred(i, k) << '\n';
      eo << s << ',' << act(i, k) - pred(i, k) << '\n';
    }
    if (!po || !eo) throw IoError("write failed under '" + out_dir.string() + "'");
    written.push_back(pp);
    written.push_back(ep);
  }
  return written;
}

/// Human-readable table.
inline void print_report(const EvalReport& r, std::ostream& out) {
  out << std::fixed << std::setprecision(4);
  out << std::left << std::setw(16) << "target" << std::right << std::setw(14) << "MSE (K^2)"
      << std::setw(16) << "max|err| (K)" << '\n';
  for (std::size_t k = 0; k < 4; ++k)
    out << std::left << std::setw(16) << target_names()[k] << std::right << std::setw(14)
        << r.mse[k] << std::setw(16) << r.max_abs[k] << '\n';
  out << std::left << std::setw(16) << "overall" << std::right << std::setw(14) << r.overall_mse
      << std::setw(16) << r.overall_max_abs << '\n';
  out << "samples: " << r.samples << '\n';
  if (!std::isnan(r.inference_ms)) out << "inference time per batch (ms): " << r.inference_ms << '\n';
  out.unsetf(std::ios::floatfield);
}

/// Machine-readable key = value form.
inline void write_report_kv(const EvalReport& r, std::ostream& out) {
  out << std::setprecision(17);
  for (std::size_t k = 0; k < 4; ++k) {
    out << "mse." << target_names()[k] << " = " << r.mse[k] << '\n';
    out << "max_abs_error." << target_names()[k] << " = " << r.max_abs[k] << '\n';
  }
  out << "mse.overall = " << r.overall_mse << '\n';
  out << "max_abs_error.overall = " << r.overall_max_abs << '\n';
  out << "samples = " << r.samples << '\n';
  if (!std::isnan(r.inference_ms)) out << "inference_ms_per_batch = " << r.inference_ms << '\n';
}

}  // namespace pmsm
