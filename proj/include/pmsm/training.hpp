#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "pmsm/dataio.hpp"
#include "pmsm/error.hpp"
#include "pmsm/features.hpp"
#include "pmsm/matrix.hpp"
#include "pmsm/models.hpp"
#include "pmsm/random.hpp"
#include "pmsm/tape.hpp"

namespace pmsm {

struct TrainConfig {
  std::size_t batch_size = 256;
  /// Rows per recorded tape; gradients of micro-batches are summed into the batch
  /// gradient. Bounds tape memory only.
  std::size_t micro_batch = 64;
  double learning_rate = 0.0005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t epochs_per_group = 25;
  std::size_t groups = 4;
  std::size_t finetune_profiles = 8;
  std::size_t finetune_epochs = 25;
  std::uint64_t seed = 0;
  std::optional<double> clip_norm = 5.0;

  void validate() const {
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    if (micro_batch < 1) throw ConfigError("micro batch must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
    if (groups < 1) throw ConfigError("group count must be >= 1");
    if (clip_norm && !(*clip_norm > 0.0)) throw ConfigError("clip norm must be > 0");
  }
};

/// Mean over all entries of the squared difference.
inline double mse_loss(const Matrix& pred, const Matrix& target) {
  Matrix::require_same_shape(pred, target, "mse_loss");
  if (pred.empty()) throw ShapeError("mse_loss: empty prediction");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred.data()[i] - target.data()[i];
    s += d * d;
  }
  return s / static_cast<double>(pred.size());
}

/// Tape version. `denominator` defaults to the element count of `pred`; micro-batches
/// pass the element count of the full batch so their losses sum to the batch mean.
inline Var mse_loss(Tape& tape, Var pred, const Matrix& target, double denominator = 0.0) {
  Matrix::require_same_shape(tape.value(pred), target, "mse_loss");
  if (denominator <= 0.0) denominator = static_cast<double>(target.size());
  Var diff = tape.add(pred, tape.constant(scale(target, -1.0)));
  return tape.scale(tape.sum(tape.hadamard(diff, diff)), 1.0 / denominator);
}

/// Physical-unit targets mapped into training units.
inline Matrix model_targets(const Matrix& physical, const StandardizationStats& stats) {
  Matrix t = physical;
  for (std::size_t r = 0; r < t.rows(); ++r)
    for (std::size_t k = 0; k < t.cols(); ++k) t(r, k) = to_model_units(stats, k, t(r, k));
  return t;
}

struct LossAndGrad {
  double loss = 0.0;
  std::vector<Matrix> grads;  // ModelParams::blocks() order
};

/// Loss on `targets` (training units) and its gradient with respect to every block.
inline LossAndGrad loss_and_gradients(const ModelParams& params, std::span<const Matrix> steps,
                                      const Matrix& targets, std::size_t micro_batch = 0) {
  const std::size_t batch = targets.rows();
  if (micro_batch == 0 || micro_batch > batch) micro_batch = batch;
  const double denom = static_cast<double>(batch * targets.cols());

  LossAndGrad out;
  for (const auto& b : params.blocks()) out.grads.emplace_back(b.value->rows(), b.value->cols());

  for (std::size_t start = 0; start < batch; start += micro_batch) {
    const std::size_t rows = std::min(micro_batch, batch - start);
    std::vector<Matrix> sub;
    const std::span<const Matrix> sub_steps = [&]() -> std::span<const Matrix> {
      if (rows == batch) return steps;
      sub.reserve(steps.size());
      for (const Matrix& s : steps) {
        Matrix m(rows, s.cols());
        std::copy_n(s.data() + start * s.cols(), rows * s.cols(), m.data());
        sub.push_back(std::move(m));
      }
      return sub;
    }();
    Matrix sub_targets(rows, targets.cols());
    std::copy_n(targets.data() + start * targets.cols(), rows * targets.cols(), sub_targets.data());

    Tape tape;
    auto bound = bind(tape, params);
    auto fwd = forward_generic(tape, bound, sub_steps);
    Var loss = mse_loss(tape, fwd.y, sub_targets, denom);
    out.loss += tape.value(loss)(0, 0);
    const Gradients g = tape.backward(loss);
    for (std::size_t i = 0; i < bound.leaves.size(); ++i) {
      const Matrix& gi = g[bound.leaves[i]];
      if (!gi.empty()) out.grads[i] += gi;
    }
  }
  return out;
}

/// First/second moment accumulators mirroring the parameter blocks.
struct AdamState {
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  std::uint64_t step = 0;

  static AdamState for_params(const ModelParams& p) {
    AdamState s;
    for (const auto& b : p.blocks()) {
      s.m.emplace_back(b.value->rows(), b.value->cols());
      s.v.emplace_back(b.value->rows(), b.value->cols());
    }
    return s;
  }
};

inline double global_norm(std::span<const Matrix> grads) {
  double s = 0.0;
  for (const auto& g : grads)
    for (double v : g.values()) s += v * v;
  return std::sqrt(s);
}

/// Bias-corrected Adam update. Gradients are clipped to the configured global norm
/// first. Non-finite gradients abort with the offending block named.
inline void adam_step(ModelParams& params, std::vector<Matrix> grads, AdamState& state,
                      const TrainConfig& config) {
  auto blocks = params.blocks();
  if (grads.size() != blocks.size() || state.m.size() != blocks.size())
    throw ShapeError("adam_step: gradient/state count does not match parameter blocks");
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    Matrix::require_same_shape(*blocks[i].value, grads[i], "adam_step");
    if (!all_finite(grads[i]))
      throw TrainingError("non-finite gradient in parameter block '" + blocks[i].name + "'");
  }
  if (config.clip_norm) {
    const double norm = global_norm(grads);
    if (norm > *config.clip_norm) {
      const double f = *config.clip_norm / norm;
      for (auto& g : grads)
        for (double& v : g.values()) v *= f;
    }
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    double* p = blocks[i].value->data();
    double* m = state.m[i].data();
    double* v = state.v[i].data();
    const double* g = grads[i].data();
    for (std::size_t k = 0; k < grads[i].size(); ++k) {
      m[k] = config.beta1 * m[k] + (1.0 - config.beta1) * g[k];
      v[k] = config.beta2 * v[k] + (1.0 - config.beta2) * g[k] * g[k];
      const double m_hat = m[k] / c1;
      const double v_hat = v[k] / c2;
      p[k] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
  }
}

/// Model-unit MSE over a whole tensor, evaluated in chunks.
inline double dataset_loss(const ModelParams& params, const FeatureTensor& data,
                           const StandardizationStats& stats, std::size_t chunk = 256) {
  if (data.empty()) return std::numeric_limits<double>::quiet_NaN();
  double total = 0.0;
  for (std::size_t start = 0; start < data.size(); start += chunk) {
    const std::size_t end = std::min(start + chunk, data.size());
    const SequenceBatch b = data.gather_range(start, end);
    const Matrix pred = forward(params, b.steps);
    total += mse_loss(pred, model_targets(b.targets, stats)) * static_cast<double>(end - start);
  }
  return total / static_cast<double>(data.size());
}

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based, counted across groups
  std::string group;      // "1".."N" or "finetune"
  double train_loss = 0.0;
  double eval_loss = std::numeric_limits<double>::quiet_NaN();
  double wall_seconds = 0.0;
};

/// Return false to stop training early.
using EpochCallback = std::function<bool(const EpochRecord&, const ModelParams&)>;

struct Trainer {
  ModelParams params;
  AdamState adam;
  TrainConfig config;
  StandardizationStats stats;
  Rng rng;
  std::vector<EpochRecord> log;

  Trainer(ModelParams p, StandardizationStats s, TrainConfig c)
      : params(std::move(p)),
        adam(AdamState::for_params(params)),
        config(std::move(c)),
        stats(std::move(s)),
        rng(derive_seed(config.seed, 0x747261696eULL)) {
    config.validate();
  }

  /// One optimizer step on the given windows. Returns the batch loss before the update.
  double step(const FeatureTensor& data, std::span<const std::size_t> indices) {
    const SequenceBatch b = data.gather(indices);
    auto lg = loss_and_gradients(params, b.steps, model_targets(b.targets, stats),
                                 config.micro_batch);
    adam_step(params, std::move(lg.grads), adam, config);
    return lg.loss;
  }

  /// Shuffled mini-batch epochs over `data`. `held_out` may be empty.
  /// Returns false if the callback asked to stop.
  bool fit(const FeatureTensor& data, const FeatureTensor* held_out, std::size_t epochs,
           const std::string& group, const EpochCallback& on_epoch = {}) {
    if (data.empty()) throw ConfigError("training group '" + group + "' has no windows");
    std::vector<std::size_t> order(data.size());
    for (std::size_t e = 0; e < epochs; ++e) {
      const auto t0 = std::chrono::steady_clock::now();
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      rng.shuffle(order);
      double weighted = 0.0;
      for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
        const std::size_t end = std::min(start + config.batch_size, order.size());
        const std::span<const std::size_t> idx(order.data() + start, end - start);
        weighted += step(data, idx) * static_cast<double>(idx.size());
      }
      EpochRecord rec;
      rec.epoch = log.size() + 1;
      rec.group = group;
      rec.train_loss = weighted / static_cast<double>(order.size());
      if (held_out && !held_out->empty()) rec.eval_loss = dataset_loss(params, *held_out, stats);
      rec.wall_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      log.push_back(rec);
      if (on_epoch && !on_epoch(rec, params)) return false;
    }
    return true;
  }
};

/// Contiguous partition of `n` items into `groups` parts; the first n % groups parts get
/// one extra item.
inline std::vector<std::pair<std::size_t, std::size_t>> partition_ranges(std::size_t n,
                                                                         std::size_t groups) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t start = 0;
  for (std::size_t g = 0; g < groups; ++g) {
    const std::size_t len = n / groups + (g < n % groups ? 1 : 0);
    out.emplace_back(start, start + len);
    start += len;
  }
  return out;
}

struct TrainResult {
  ModelParams params;
  StandardizationStats stats;
  std::vector<EpochRecord> log;
};

/// Channels for every frame plus statistics fitted on `train` only.
struct PreparedData {
  std::vector<ChannelFrame> train;
  std::vector<ChannelFrame> test;
  StandardizationStats stats;
};

inline PreparedData prepare(const DatasetSplit& split, const FeatureConfig& features) {
  PreparedData d;
  for (const auto& f : split.train) d.train.push_back(build_channels(f, features));
  for (const auto& f : split.test) d.test.push_back(build_channels(f, features));
  d.stats = standardize(d.train, features.standardize_targets);
  for (auto& f : d.test) apply_standardization(f, d.stats);
  return d;
}

/// Two-phase schedule: sequential training on contiguous profile groups, then
/// fine-tuning on a seeded random sample of training profiles. Held-out loss is
/// reported on the test profiles.
inline TrainResult train_grouped(const DatasetSplit& split, const FeatureConfig& features,
                                 Variant variant, const TrainConfig& config,
                                 std::size_t hidden = 100, const EpochCallback& on_epoch = {},
                                 const WarningSink& warn = warn_stderr) {
  config.validate();
  if (split.train.empty()) throw ConfigError("no training profiles");
  const auto ranges = partition_ranges(split.train.size(), config.groups);
  for (std::size_t g = 0; g < ranges.size(); ++g) {
    if (ranges[g].first == ranges[g].second) {
      throw ConfigError("training group " + std::to_string(g + 1) + " is empty: " +
                        std::to_string(split.train.size()) + " profiles for " +
                        std::to_string(config.groups) + " groups");
    }
  }

  PreparedData data = prepare(split, features);
  const FeatureTensor held_out = windowize(data.test, features, warn);

  ModelDims dims{features.channel_count(), hidden, 4};
  Trainer trainer(init_params(variant, derive_seed(config.seed, 0x696e6974ULL), dims),
                  data.stats, config);

  auto subset = [&](std::span<const std::size_t> which) {
    std::vector<ChannelFrame> frames;
    for (std::size_t i : which) frames.push_back(data.train[i]);
    return windowize(std::move(frames), features, warn);
  };

  bool running = true;
  for (std::size_t g = 0; g < ranges.size() && running; ++g) {
    std::vector<std::size_t> idx;
    for (std::size_t i = ranges[g].first; i < ranges[g].second; ++i) idx.push_back(i);
    const FeatureTensor group = subset(idx);
    running = trainer.fit(group, &held_out, config.epochs_per_group, std::to_string(g + 1),
                          on_epoch);
  }

  if (running && config.finetune_profiles > 0 && config.finetune_epochs > 0) {
    std::vector<std::size_t> pool(split.train.size());
    for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
    Rng pick(derive_seed(config.seed, 0x66696e65ULL));
    pick.shuffle(pool);
    pool.resize(std::min(config.finetune_profiles, pool.size()));
    std::sort(pool.begin(), pool.end());
    const FeatureTensor tune = subset(pool);
    trainer.fit(tune, &held_out, config.finetune_epochs, "finetune", on_epoch);
  }

  return {std::move(trainer.params), std::move(trainer.stats), std::move(trainer.log)};
}

}  // namespace pmsm
