#pragma once

// Command-line front end: synth, ingest, featurize, train, evaluate, predict, inspect.
// Exit codes: 0 success, 1 runtime error, 2 usage error.

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "pmsm/checkpoint.hpp"
#include "pmsm/dataio.hpp"
#include "pmsm/error.hpp"
#include "pmsm/eval.hpp"
#include "pmsm/features.hpp"
#include "pmsm/models.hpp"
#include "pmsm/training.hpp"

namespace pmsm {

/// Thrown for command-line misuse; maps to exit code 2.
class UsageError : public Error {
public:
  using Error::Error;
};

namespace detail {

inline std::string shortest(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

}  // namespace detail

/// Everything a run needs; persisted as effective_config.ini in the output directory.
struct RunConfig {
  std::string data;
  bool synth = false;
  std::size_t synth_profiles = 6;
  std::size_t synth_length = 2000;
  std::string out = "out";
  std::uint64_t seed = 0;
  std::string variant = "attention";
  std::string test_profiles;  // empty: 65 for benchmark data, last profile for synthetic data
  std::string val_profiles;
  std::string synthetic_set = "imc-smc";
  std::string spans = "1320,3360,6360,9480";
  bool no_raw = false;
  std::size_t window = 180;
  std::size_t stride = 1;
  bool raw_targets = false;
  std::size_t hidden = 100;
  std::size_t batch_size = 256;
  std::size_t micro_batch = 64;
  double lr = 0.0005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t epochs = 25;
  std::size_t groups = 4;
  std::size_t finetune_profiles = 8;
  std::size_t finetune_epochs = 25;
  double clip_norm = 5.0;  // <= 0 disables
  std::size_t patience = 0;  // 0 disables early stopping on the held-out loss
  std::string checkpoint;    // default <out>/model.ckpt
  std::size_t timing_reps = 10;
  bool dump = false;

  FeatureConfig features() const {
    FeatureConfig f;
    f.synthetic = parse_synthetic_set(synthetic_set);
    f.spans.clear();
    for (const auto& s : detail::split_list(spans)) {
      if (s.empty()) continue;
      try {
        f.spans.push_back(std::stoul(s));
      } catch (const std::exception&) {
        throw ConfigError("bad span '" + s + "'");
      }
    }
    f.include_raw = !no_raw;
    f.window = window;
    f.stride = stride;
    f.standardize_targets = !raw_targets;
    f.validate();
    return f;
  }

  TrainConfig train() const {
    TrainConfig t;
    t.batch_size = batch_size;
    t.micro_batch = micro_batch;
    t.learning_rate = lr;
    t.beta1 = beta1;
    t.beta2 = beta2;
    t.epsilon = adam_eps;
    t.epochs_per_group = epochs;
    t.groups = groups;
    t.finetune_profiles = finetune_profiles;
    t.finetune_epochs = finetune_epochs;
    t.seed = seed;
    t.clip_norm = clip_norm > 0.0 ? std::optional<double>(clip_norm) : std::nullopt;
    t.validate();
    return t;
  }

  std::filesystem::path checkpoint_path() const {
    return checkpoint.empty() ? std::filesystem::path(out) / "model.ckpt"
                              : std::filesystem::path(checkpoint);
  }

  /// key = value lines, readable back through --config.
  std::string to_ini() const {
    std::ostringstream o;
    auto q = [](const std::string& s) { return "\"" + s + "\""; };
    if (!data.empty()) o << "data = " << q(data) << '\n';
    o << "synth = " << (synth ? "true" : "false") << '\n'
      << "synth-profiles = " << synth_profiles << '\n'
      << "synth-length = " << synth_length << '\n'
      << "out = " << q(out) << '\n'
      << "seed = " << seed << '\n'
      << "variant = " << q(variant) << '\n';
    if (!test_profiles.empty()) o << "test-profiles = " << q(test_profiles) << '\n';
    if (!val_profiles.empty()) o << "val-profiles = " << q(val_profiles) << '\n';
    o << "synthetic-set = " << q(synthetic_set) << '\n'
      << "spans = " << q(spans) << '\n'
      << "no-raw = " << (no_raw ? "true" : "false") << '\n'
      << "window = " << window << '\n'
      << "stride = " << stride << '\n'
      << "raw-targets = " << (raw_targets ? "true" : "false") << '\n'
      << "hidden = " << hidden << '\n'
      << "batch-size = " << batch_size << '\n'
      << "micro-batch = " << micro_batch << '\n'
      << "lr = " << detail::shortest(lr) << '\n'
      << "beta1 = " << detail::shortest(beta1) << '\n'
      << "beta2 = " << detail::shortest(beta2) << '\n'
      << "adam-eps = " << detail::shortest(adam_eps) << '\n'
      << "epochs = " << epochs << '\n'
      << "groups = " << groups << '\n'
      << "finetune-profiles = " << finetune_profiles << '\n'
      << "finetune-epochs = " << finetune_epochs << '\n'
      << "clip-norm = " << detail::shortest(clip_norm) << '\n'
      << "patience = " << patience << '\n';
    if (!checkpoint.empty()) o << "checkpoint = " << q(checkpoint) << '\n';
    o << "timing-reps = " << timing_reps << '\n';
    return o.str();
  }
};

namespace cli {

inline std::set<int> parse_ids(const std::string& s) {
  std::set<int> ids;
  for (const auto& tok : detail::split_list(s)) {
    if (tok.empty()) continue;
    try {
      std::size_t used = 0;
      const int v = std::stoi(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      ids.insert(v);
    } catch (const std::exception&) {
      throw ConfigError("bad profile id '" + tok + "'");
    }
  }
  return ids;
}

struct Context {
  RunConfig cfg;
  bool variant_given = false;
  bool test_given = false;
  bool stride_given = false;
  std::ostream* out = &std::cout;
  std::ostream* err = &std::cerr;

  WarningSink warn() const {
    return [e = err](const std::string& m) { *e << "warning: " << m << '\n'; };
  }
};

inline std::filesystem::path ensure_out(const Context& c) {
  std::filesystem::path p(c.cfg.out);
  std::error_code ec;
  std::filesystem::create_directories(p, ec);
  if (ec) throw IoError("cannot create output directory '" + p.string() + "': " + ec.message());
  return p;
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw IoError("cannot write '" + p.string() + "'");
  f << text;
  if (!f) throw IoError("write failed for '" + p.string() + "'");
}

inline std::vector<ProfileFrame> load_frames(const Context& c) {
  if (!c.cfg.data.empty()) return load_csv(c.cfg.data, benchmark_schema(), c.warn());
  if (c.cfg.synth) return synthesize(c.cfg.seed, c.cfg.synth_profiles, c.cfg.synth_length);
  throw UsageError("no input data: pass --data <csv> or --synth");
}

inline std::set<int> test_ids(const Context& c, const std::vector<ProfileFrame>& frames) {
  if (!c.cfg.test_profiles.empty()) return parse_ids(c.cfg.test_profiles);
  if (!c.cfg.data.empty()) return {65};
  return frames.empty() ? std::set<int>{} : std::set<int>{frames.back().profile_id};
}

inline int cmd_synth(Context& c) {
  if (!c.cfg.synth && !c.cfg.data.empty())
    throw UsageError("synth writes generated data; --data is not used here");
  const auto dir = ensure_out(c);
  const auto frames = synthesize(c.cfg.seed, c.cfg.synth_profiles, c.cfg.synth_length);
  write_csv(frames, (dir / "synthetic.csv").string());
  *c.out << "wrote " << frames.size() << " profiles x " << c.cfg.synth_length << " samples to "
         << (dir / "synthetic.csv").string() << '\n';
  return 0;
}

inline int cmd_ingest(Context& c) {
  const auto frames = load_frames(c);
  std::size_t rows = 0;
  for (const auto& f : frames) rows += f.length();
  *c.out << "profiles: " << frames.size() << "\nsamples: " << rows << '\n';
  const auto& tn = target_names();
  const std::vector<std::string> targets(tn.begin(), tn.end());
  *c.out << "average |correlation| with the four targets:\n";
  for (const auto& name : benchmark_schema()) {
    if (std::find(tn.begin(), tn.end(), name) != tn.end()) continue;
    *c.out << "  " << std::left << std::setw(14) << name << std::right;
    try {
      *c.out << std::fixed << std::setprecision(3)
             << avg_abs_correlation(frames, name, targets) << '\n';
    } catch (const UndefinedCorrelation&) {
      *c.out << "undefined (zero variance)\n";
    }
    c.out->unsetf(std::ios::floatfield);
  }
  return 0;
}

inline int cmd_featurize(Context& c) {
  const FeatureConfig fc = c.cfg.features();
  auto frames = load_frames(c);
  const auto ids = test_ids(c, frames);
  const DatasetSplit sp = split(std::move(frames), ids);
  PreparedData data = prepare(sp, fc);
  const auto dir = ensure_out(c);

  std::ostringstream channels;
  for (const auto& n : fc.channel_names()) channels << n << '\n';
  write_text(dir / "channels.txt", channels.str());

  std::ostringstream stats;
  stats << std::setprecision(17);
  const auto names = fc.channel_names();
  for (std::size_t i = 0; i < names.size(); ++i)
    stats << names[i] << ".mean = " << data.stats.channel_mean[i] << '\n'
          << names[i] << ".std = " << data.stats.channel_std[i] << '\n';
  for (std::size_t k = 0; k < 4; ++k)
    stats << target_names()[k] << ".mean = " << data.stats.target_mean[k] << '\n'
          << target_names()[k] << ".std = " << data.stats.target_std[k] << '\n';
  write_text(dir / "stats.kv", stats.str());

  if (c.cfg.dump) {
    std::ofstream f(dir / "features.csv");
    if (!f) throw IoError("cannot write features.csv");
    f << std::setprecision(17) << "split,profile_id,t";
    for (const auto& n : names) f << ',' << n;
    f << '\n';
    auto dump = [&](const std::vector<ChannelFrame>& fs, const char* tag) {
      for (const auto& cf : fs)
        for (std::size_t t = 0; t < cf.length(); ++t) {
          f << tag << ',' << cf.profile_id << ',' << t;
          for (double v : cf.features.row(t)) f << ',' << v;
          f << '\n';
        }
    };
    dump(data.train, "train");
    dump(data.test, "test");
  }

  const FeatureTensor train = windowize(std::move(data.train), fc, c.warn());
  const FeatureTensor test = windowize(std::move(data.test), fc, c.warn());
  std::ofstream w(dir / "windows.csv");
  if (!w) throw IoError("cannot write windows.csv");
  w << "split,profile_id,end_index\n";
  for (const auto& r : train.windows()) w << "train," << r.profile_id << ',' << r.end << '\n';
  for (const auto& r : test.windows()) w << "test," << r.profile_id << ',' << r.end << '\n';
  write_text(dir / "effective_config.ini", c.cfg.to_ini());

  *c.out << "channels: " << fc.channel_count() << "\ntrain windows: " << train.size()
         << "\ntest windows: " << test.size() << '\n';
  return 0;
}

inline int cmd_train(Context& c) {
  if (c.cfg.data.empty() && !c.cfg.synth)
    throw UsageError("train needs input data: pass --data <csv> or --synth");
  const FeatureConfig fc = c.cfg.features();
  const TrainConfig tc = c.cfg.train();
  const Variant variant = parse_variant(c.cfg.variant);

  auto frames = load_frames(c);
  const auto ids = test_ids(c, frames);
  DatasetSplit sp = split(std::move(frames), ids);
  if (!c.cfg.val_profiles.empty()) {
    // Validation profiles replace the test set as the per-epoch held-out loss.
    DatasetSplit inner = split(std::move(sp.train), parse_ids(c.cfg.val_profiles));
    sp = std::move(inner);
  }

  const auto dir = ensure_out(c);
  c.cfg.checkpoint = c.cfg.checkpoint_path().string();
  write_text(dir / "effective_config.ini", c.cfg.to_ini());
  std::ofstream log(dir / "train_log.jsonl", std::ios::binary);
  std::ofstream timing(dir / "timing.jsonl", std::ios::binary);
  if (!log || !timing) throw IoError("cannot write training logs under '" + dir.string() + "'");

  double best = std::numeric_limits<double>::infinity();
  std::size_t stale = 0;
  auto on_epoch = [&](const EpochRecord& r, const ModelParams&) {
    nlohmann::json j;
    j["epoch"] = r.epoch;
    j["group"] = r.group;
    j["train_loss"] = r.train_loss;
    j["eval_loss"] = std::isnan(r.eval_loss) ? nlohmann::json(nullptr) : nlohmann::json(r.eval_loss);
    log << j.dump() << '\n';
    log.flush();
    timing << nlohmann::json{{"epoch", r.epoch}, {"wall_time", r.wall_seconds}}.dump() << '\n';
    *c.out << "epoch " << r.epoch << " [" << r.group << "] train " << r.train_loss << " eval "
           << r.eval_loss << '\n';
    if (c.cfg.patience == 0 || std::isnan(r.eval_loss)) return true;
    if (r.eval_loss < best) {
      best = r.eval_loss;
      stale = 0;
      return true;
    }
    return ++stale < c.cfg.patience;
  };

  TrainResult res = train_grouped(sp, fc, variant, tc, c.cfg.hidden, on_epoch, c.warn());
  save_checkpoint({res.params, res.stats, fc}, c.cfg.checkpoint_path().string());
  *c.out << "checkpoint: " << c.cfg.checkpoint_path().string() << '\n';
  return 0;
}

/// Test tensor for a checkpoint: its feature config (stride optionally overridden)
/// and its standardization statistics.
inline FeatureTensor checkpoint_tensor(const Context& c, const Checkpoint& ck,
                                       std::vector<ProfileFrame> frames) {
  FeatureConfig fc = ck.features;
  if (c.stride_given) fc.stride = c.cfg.stride;
  std::vector<ChannelFrame> chans;
  for (const auto& f : frames) {
    ChannelFrame cf = build_channels(f, fc);
    apply_standardization(cf, ck.stats);
    chans.push_back(std::move(cf));
  }
  return windowize(std::move(chans), fc, c.warn());
}

inline std::optional<Variant> expected_variant(const Context& c) {
  if (!c.variant_given) return std::nullopt;
  return parse_variant(c.cfg.variant);
}

inline int cmd_evaluate(Context& c) {
  const Checkpoint ck = load_checkpoint(c.cfg.checkpoint_path().string(), expected_variant(c));
  auto frames = load_frames(c);
  const auto ids = test_ids(c, frames);
  DatasetSplit sp = split(std::move(frames), ids);
  const FeatureTensor test = checkpoint_tensor(c, ck, std::move(sp.test));
  EvalReport report = evaluate(ck.params, test, ck.stats);
  if (c.cfg.timing_reps > 0) {
    std::vector<std::size_t> idx(std::min<std::size_t>(c.cfg.batch_size, test.size()));
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    const SequenceBatch b = test.gather(idx);
    report.inference_ms = time_inference(ck.params, b.steps, std::max<std::size_t>(c.cfg.timing_reps, 10));
  }

  const auto dir = ensure_out(c);
  std::ostringstream table;
  table << "variant: " << variant_name(ck.params.variant) << "\ntest profiles:";
  for (int id : ids) table << ' ' << id;
  table << '\n';
  print_report(report, table);
  write_text(dir / "report.txt", table.str());
  std::ostringstream kv;
  write_report_kv(report, kv);
  write_text(dir / "metrics.kv", kv.str());
  emit_traces(ck.params, test, ck.stats, dir / "traces");
  write_text(dir / "evaluate_config.ini", c.cfg.to_ini());
  *c.out << table.str();
  return 0;
}

inline int cmd_predict(Context& c) {
  const Checkpoint ck = load_checkpoint(c.cfg.checkpoint_path().string(), expected_variant(c));
  auto frames = load_frames(c);
  if (c.test_given) {
    DatasetSplit sp = split(std::move(frames), parse_ids(c.cfg.test_profiles));
    frames = std::move(sp.test);
  }
  const FeatureTensor data = checkpoint_tensor(c, ck, std::move(frames));
  const Matrix pred = predict(ck.params, data, ck.stats);
  const auto dir = ensure_out(c);
  std::ofstream f(dir / "predictions.csv");
  if (!f) throw IoError("cannot write predictions.csv");
  f << std::setprecision(17) << "profile_id,end_index";
  for (const auto& n : target_names()) f << ',' << n;
  f << '\n';
  for (std::size_t i : provenance_order(data)) {
    const auto& w = data.windows()[i];
    f << w.profile_id << ',' << w.end;
    for (std::size_t k = 0; k < 4; ++k) f << ',' << pred(i, k);
    f << '\n';
  }
  if (!f) throw IoError("write failed for predictions.csv");
  *c.out << "wrote " << data.size() << " predictions to " << (dir / "predictions.csv").string()
         << '\n';
  return 0;
}

inline int cmd_inspect(Context& c) {
  const Checkpoint ck = load_checkpoint(c.cfg.checkpoint_path().string(), expected_variant(c));
  const ModelParams& p = ck.params;
  auto& o = *c.out;
  o << "variant: " << variant_name(p.variant) << '\n'
    << "input: " << p.dims.input << "  hidden: " << p.dims.hidden << "  output: " << p.dims.output
    << '\n'
    << "features: window " << ck.features.window << ", synthetic set "
    << synthetic_set_name(ck.features.synthetic) << ", " << ck.features.channel_count()
    << " channels\n\n";
  o << std::left << std::setw(14) << "Layer" << std::setw(10) << "Type" << std::setw(30)
    << "Shape" << "Connect To\n";
  for (const auto& r : layer_table(p, ck.features.window)) {
    // setw counts bytes; pad by hand so the two-byte β does not skew columns.
    auto pad = [](const std::string& s, std::size_t w) {
      std::size_t glyphs = 0;
      for (unsigned char ch : s) glyphs += (ch & 0xC0) != 0x80;
      return s + std::string(w > glyphs ? w - glyphs : 1, ' ');
    };
    o << pad(r.layer, 14) << pad(r.type, 10) << pad(r.shape, 30) << r.connect << '\n';
  }
  o << "\nparameter blocks:\n";
  for (const auto& b : p.blocks())
    o << "  " << std::setw(26) << b.name << b.value->rows() << " x " << b.value->cols() << '\n';
  o << std::right << "\nTotal trainable parameters: " << count_params(p) << '\n';
  return 0;
}

}  // namespace cli

/// Entry point shared by the executable and the tests.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  cli::Context ctx;
  ctx.out = &out;
  ctx.err = &err;
  RunConfig& cfg = ctx.cfg;

  CLI::App app{"Encoder-decoder LSTM temperature estimation for PMSMs"};
  app.fallthrough();
  app.require_subcommand(1);
  app.set_config("--config", "", "Read options from a key = value file; flags override it");

  app.add_option("--data", cfg.data, "Benchmark-format CSV file");
  app.add_flag("--synth", cfg.synth, "Use generated data instead of --data");
  app.add_option("--synth-profiles", cfg.synth_profiles, "Generated profile count");
  app.add_option("--synth-length", cfg.synth_length, "Samples per generated profile");
  app.add_option("--out", cfg.out, "Output directory");
  app.add_option("--seed", cfg.seed, "Master seed");
  auto* variant_opt = app.add_option("--variant", cfg.variant, "vanilla | bilstm | attention")
                          ->check(CLI::IsMember({"vanilla", "bilstm", "attention"}));
  auto* test_opt = app.add_option("--test-profiles", cfg.test_profiles,
                                  "Comma list of held-out profile ids (default 65)");
  app.add_option("--val-profiles", cfg.val_profiles, "Comma list of validation profile ids");
  app.add_option("--synthetic-set", cfg.synthetic_set, "imm-smm | imc-smc | all")
      ->check(CLI::IsMember({"imm-smm", "imc-smc", "all"}));
  app.add_option("--spans", cfg.spans, "Comma list of EWMA spans");
  app.add_flag("--no-raw", cfg.no_raw, "Drop the unsmoothed channel block");
  app.add_option("--window", cfg.window, "Input sequence length");
  auto* stride_opt = app.add_option("--stride", cfg.stride, "Window stride");
  app.add_flag("--raw-targets", cfg.raw_targets, "Train on unstandardized targets");
  app.add_option("--hidden", cfg.hidden, "LSTM hidden width");
  app.add_option("--batch-size", cfg.batch_size);
  app.add_option("--micro-batch", cfg.micro_batch, "Rows per recorded tape");
  app.add_option("--lr", cfg.lr, "Adam learning rate");
  app.add_option("--beta1", cfg.beta1);
  app.add_option("--beta2", cfg.beta2);
  app.add_option("--adam-eps", cfg.adam_eps);
  app.add_option("--epochs", cfg.epochs, "Epochs per training group");
  app.add_option("--groups", cfg.groups, "Number of sequential training groups");
  app.add_option("--finetune-profiles", cfg.finetune_profiles);
  app.add_option("--finetune-epochs", cfg.finetune_epochs);
  app.add_option("--clip-norm", cfg.clip_norm, "Global gradient-norm clip, <= 0 disables");
  app.add_option("--patience", cfg.patience, "Early-stopping patience in epochs, 0 disables");
  app.add_option("--checkpoint", cfg.checkpoint, "Checkpoint path (default <out>/model.ckpt)");
  app.add_option("--timing-reps", cfg.timing_reps, "Timed forward passes, 0 skips timing");
  app.add_flag("--dump", cfg.dump, "featurize: also write per-sample feature rows");

  std::function<int(cli::Context&)> action;
  auto sub = [&](const char* name, const char* help, int (*fn)(cli::Context&)) {
    app.add_subcommand(name, help)->callback([&action, fn] { action = fn; });
  };
  sub("synth", "Write a generated PMSM-like dataset", cli::cmd_synth);
  sub("ingest", "Summarize a dataset and attribute correlations", cli::cmd_ingest);
  sub("featurize", "Build channels, statistics and windows", cli::cmd_featurize);
  sub("train", "Train a model with the grouped schedule", cli::cmd_train);
  sub("evaluate", "Evaluate a checkpoint on held-out profiles", cli::cmd_evaluate);
  sub("predict", "Write predictions for every window", cli::cmd_predict);
  sub("inspect", "Print a checkpoint's layer table and parameter count", cli::cmd_inspect);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n' << "run with --help for usage\n";
    return 2;
  }
  ctx.variant_given = variant_opt->count() > 0;
  ctx.test_given = test_opt->count() > 0;
  ctx.stride_given = stride_opt->count() > 0;

  try {
    return action ? action(ctx) : 2;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace pmsm
