#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>

#include "pmsm/matrix.hpp"
#include "pmsm/random.hpp"

namespace pmsm::test {

inline Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c, double lo = -1.0,
                            double hi = 1.0) {
  Matrix m(r, c);
  for (double& v : m.values()) v = rng.uniform(lo, hi);
  return m;
}

/// Central difference of a scalar function with respect to every entry of `at`.
inline Matrix numeric_gradient(const std::function<double(const Matrix&)>& f, Matrix at,
                               double h = 1e-6) {
  Matrix g(at.rows(), at.cols());
  for (std::size_t i = 0; i < at.size(); ++i) {
    const double keep = at.values()[i];
    at.values()[i] = keep + h;
    const double up = f(at);
    at.values()[i] = keep - h;
    const double down = f(at);
    at.values()[i] = keep;
    g.values()[i] = (up - down) / (2.0 * h);
  }
  return g;
}

/// Largest |a-b| / max(1, |a|, |b|).
inline double max_rel_diff(const Matrix& a, const Matrix& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a.values()[i], y = b.values()[i];
    worst = std::max(worst, std::abs(x - y) / std::max({1.0, std::abs(x), std::abs(y)}));
  }
  return worst;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("pmsm_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace pmsm::test

#include "pmsm/models.hpp"
#include "pmsm/training.hpp"

namespace pmsm::test {

struct GradCheck {
  std::size_t checked = 0;   // entries with |g| above the floor
  std::size_t failures = 0;
  double worst = 0.0;        // largest relative error among checked entries
  std::string worst_block;
};

/// Every parameter entry of `params` against central differences of the eager MSE.
inline GradCheck check_model_gradients(const ModelParams& params, std::span<const Matrix> steps,
                                       const Matrix& targets, double h = 1e-4,
                                       double tolerance = 1e-4, double floor = 1e-6) {
  const auto analytic = loss_and_gradients(params, steps, targets).grads;
  ModelParams probe = params;
  auto blocks = probe.blocks();
  GradCheck out;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    auto vals = blocks[b].value->values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double keep = vals[i];
      vals[i] = keep + h;
      const double up = mse_loss(forward(probe, steps), targets);
      vals[i] = keep - h;
      const double down = mse_loss(forward(probe, steps), targets);
      vals[i] = keep;
      const double num = (up - down) / (2.0 * h);
      const double ana = analytic[b].values()[i];
      if (std::abs(ana) <= floor && std::abs(num) <= floor) continue;
      ++out.checked;
      const double rel = std::abs(ana - num) / std::max(std::abs(ana), std::abs(num));
      if (rel > out.worst) {
        out.worst = rel;
        out.worst_block = blocks[b].name;
      }
      if (rel >= tolerance) ++out.failures;
    }
  }
  return out;
}

/// T random (batch x input) steps.
inline std::vector<Matrix> random_steps(Rng& rng, std::size_t T, std::size_t batch,
                                        std::size_t input, double scale = 1.0) {
  std::vector<Matrix> s;
  for (std::size_t t = 0; t < T; ++t) s.push_back(random_matrix(rng, batch, input, -scale, scale));
  return s;
}

}  // namespace pmsm::test
