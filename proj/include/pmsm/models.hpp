#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <vector>

#include "pmsm/error.hpp"
#include "pmsm/matrix.hpp"
#include "pmsm/random.hpp"
#include "pmsm/tape.hpp"

namespace pmsm {

/// The three encoder-decoder architectures.
enum class Variant : std::uint8_t { vanilla = 0, bidirectional = 1, attention = 2 };

inline std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::vanilla: return "vanilla";
    case Variant::bidirectional: return "bilstm";
    case Variant::attention: return "attention";
  }
  return "?";
}

inline Variant parse_variant(std::string_view s) {
  if (s == "vanilla") return Variant::vanilla;
  if (s == "bilstm" || s == "bidirectional") return Variant::bidirectional;
  if (s == "attention") return Variant::attention;
  throw ConfigError("unknown variant '" + std::string(s) + "' (expected vanilla, bilstm or attention)");
}

struct ModelDims {
  std::size_t input = 65;
  std::size_t hidden = 100;
  std::size_t output = 4;

  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

/// Dense-gate LSTM weights: input-to-gate (in x h), hidden-to-gate (h x h), bias (1 x h)
/// for the input (i), forget (f), output (o) gates and the cell candidate (c).
struct LstmCellParams {
  Matrix w_xi, w_xf, w_xo, w_xc;
  Matrix w_hi, w_hf, w_ho, w_hc;
  Matrix b_i, b_f, b_o, b_c;

  static LstmCellParams zeros(std::size_t input, std::size_t hidden) {
    LstmCellParams p;
    for (Matrix* m : {&p.w_xi, &p.w_xf, &p.w_xo, &p.w_xc}) *m = Matrix(input, hidden);
    for (Matrix* m : {&p.w_hi, &p.w_hf, &p.w_ho, &p.w_hc}) *m = Matrix(hidden, hidden);
    for (Matrix* m : {&p.b_i, &p.b_f, &p.b_o, &p.b_c}) *m = Matrix(1, hidden);
    return p;
  }

  std::size_t input_dim() const { return w_xi.rows(); }
  std::size_t hidden_dim() const { return w_xi.cols(); }

  /// Visits the twelve blocks in a fixed order with their short names.
  template <typename Self, typename F>
  static void visit(Self& self, F&& f) {
    f("w_xi", self.w_xi); f("w_xf", self.w_xf); f("w_xo", self.w_xo); f("w_xc", self.w_xc);
    f("w_hi", self.w_hi); f("w_hf", self.w_hf); f("w_ho", self.w_ho); f("w_hc", self.w_hc);
    f("b_i", self.b_i);   f("b_f", self.b_f);   f("b_o", self.b_o);   f("b_c", self.b_c);
  }

  friend bool operator==(const LstmCellParams&, const LstmCellParams&) = default;
};

/// 4 h (in + h) + 4 h
constexpr std::size_t lstm_param_count(std::size_t input, std::size_t hidden) {
  return 4 * (hidden * (input + hidden) + hidden);
}

/// A named view of one parameter matrix inside ModelParams.
struct ParamBlock {
  std::string name;
  Matrix* value;
};
struct ConstParamBlock {
  std::string name;
  const Matrix* value;
};

/// Complete learnable state of one architecture. The bidirectional variant uses
/// `encoder` as the forward-time cell and `encoder_backward` as the reverse-time cell;
/// for the other variants `encoder_backward` is empty.
struct ModelParams {
  Variant variant = Variant::vanilla;
  ModelDims dims;
  LstmCellParams encoder;
  LstmCellParams encoder_backward;
  LstmCellParams decoder;
  Matrix w_y;  // (decoder hidden, or [context | decoder hidden]) x output
  Matrix b_y;  // 1 x output

  /// Zero-filled parameters with the layer shapes of `variant`.
  static ModelParams zeros(Variant variant, ModelDims dims = {}) {
    ModelParams p;
    p.variant = variant;
    p.dims = dims;
    const std::size_t h = dims.hidden;
    p.encoder = LstmCellParams::zeros(dims.input, h);
    switch (variant) {
      case Variant::vanilla:
        p.decoder = LstmCellParams::zeros(h, h);
        p.w_y = Matrix(h, dims.output);
        break;
      case Variant::bidirectional:
        p.encoder_backward = LstmCellParams::zeros(dims.input, h);
        p.decoder = LstmCellParams::zeros(2 * h, 2 * h);
        p.w_y = Matrix(2 * h, dims.output);
        break;
      case Variant::attention:
        p.decoder = LstmCellParams::zeros(h, h);
        p.w_y = Matrix(2 * h, dims.output);
        break;
    }
    p.b_y = Matrix(1, dims.output);
    return p;
  }

  bool has_backward_encoder() const { return variant == Variant::bidirectional; }

  std::vector<ParamBlock> blocks() { return blocks_impl<ParamBlock>(*this); }
  std::vector<ConstParamBlock> blocks() const { return blocks_impl<ConstParamBlock>(*this); }

  friend bool operator==(const ModelParams&, const ModelParams&) = default;

private:
  template <typename Block, typename Self>
  static std::vector<Block> blocks_impl(Self& self) {
    std::vector<Block> out;
    auto add_cell = [&](const std::string& prefix, auto& cell) {
      LstmCellParams::visit(cell, [&](const char* n, auto& m) { out.push_back({prefix + n, &m}); });
    };
    add_cell("encoder.", self.encoder);
    if (self.has_backward_encoder()) add_cell("encoder_backward.", self.encoder_backward);
    add_cell("decoder.", self.decoder);
    out.push_back({"dense.w_y", &self.w_y});
    out.push_back({"dense.b_y", &self.b_y});
    return out;
  }
};

inline std::size_t count_params(const ModelParams& p) {
  std::size_t n = 0;
  for (const auto& b : p.blocks()) n += b.value->size();
  return n;
}

/// Total for a variant without materializing it.
constexpr std::size_t count_params(Variant v, ModelDims d = {}) {
  const std::size_t h = d.hidden;
  switch (v) {
    case Variant::vanilla:
      return lstm_param_count(d.input, h) + lstm_param_count(h, h) + h * d.output + d.output;
    case Variant::bidirectional:
      return 2 * lstm_param_count(d.input, h) + lstm_param_count(2 * h, 2 * h) +
             2 * h * d.output + d.output;
    case Variant::attention:
      return lstm_param_count(d.input, h) + lstm_param_count(h, h) + 2 * h * d.output +
             d.output;
  }
  return 0;
}

inline std::vector<double> flatten(const ModelParams& p) {
  std::vector<double> out;
  out.reserve(count_params(p));
  for (const auto& b : p.blocks()) out.insert(out.end(), b.value->values().begin(), b.value->values().end());
  return out;
}

inline void assign_flat(ModelParams& p, std::span<const double> flat) {
  if (flat.size() != count_params(p)) {
    throw ShapeError("assign_flat: got " + std::to_string(flat.size()) + " values for " +
                     std::to_string(count_params(p)) + " parameters");
  }
  std::size_t off = 0;
  for (auto& b : p.blocks()) {
    std::copy_n(flat.data() + off, b.value->size(), b.value->data());
    off += b.value->size();
  }
}

// ---------------------------------------------------------------------------
// Initialization

namespace detail {

inline void fill_uniform(Matrix& m, Rng& rng, double limit) {
  for (double& v : m.values()) v = rng.uniform(-limit, limit);
}

/// Square matrix with orthonormal columns (modified Gram-Schmidt on a Gaussian draw).
inline Matrix random_orthogonal(std::size_t n, Rng& rng) {
  Matrix a(n, n);
  for (double& v : a.values()) v = rng.normal();
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = 0; k < j; ++k) {
      double dot = 0.0;
      for (std::size_t i = 0; i < n; ++i) dot += a(i, k) * a(i, j);
      for (std::size_t i = 0; i < n; ++i) a(i, j) -= dot * a(i, k);
    }
    double norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) norm += a(i, j) * a(i, j);
    norm = std::sqrt(norm);
    for (std::size_t i = 0; i < n; ++i) a(i, j) /= norm;
  }
  return a;
}

inline void init_cell(LstmCellParams& cell, Rng& rng) {
  const std::size_t in = cell.input_dim(), h = cell.hidden_dim();
  // Glorot range of the fused (in x 4h) input kernel.
  const double limit = std::sqrt(6.0 / static_cast<double>(in + 4 * h));
  for (Matrix* m : {&cell.w_xi, &cell.w_xf, &cell.w_xo, &cell.w_xc}) fill_uniform(*m, rng, limit);
  for (Matrix* m : {&cell.w_hi, &cell.w_hf, &cell.w_ho, &cell.w_hc}) *m = random_orthogonal(h, rng);
  for (Matrix* m : {&cell.b_i, &cell.b_o, &cell.b_c}) *m = Matrix(1, h, 0.0);
  cell.b_f = Matrix(1, h, 1.0);
}

}  // namespace detail

/// Glorot-uniform input and output kernels, orthogonal recurrent kernels, zero biases
/// except the forget gate (ones).
inline ModelParams init_params(Variant variant, std::uint64_t seed, ModelDims dims = {}) {
  ModelParams p = ModelParams::zeros(variant, dims);
  Rng rng(seed);
  detail::init_cell(p.encoder, rng);
  if (p.has_backward_encoder()) detail::init_cell(p.encoder_backward, rng);
  detail::init_cell(p.decoder, rng);
  detail::fill_uniform(p.w_y, rng,
                       std::sqrt(6.0 / static_cast<double>(p.w_y.rows() + p.w_y.cols())));
  return p;
}

// ---------------------------------------------------------------------------
// Forward pass, generic over Eager and Tape.

template <typename V>
struct BoundCell {
  V w_xi, w_xf, w_xo, w_xc;
  V w_hi, w_hf, w_ho, w_hc;
  V b_i, b_f, b_o, b_c;
};

template <typename V>
struct BoundModel {
  Variant variant;
  std::size_t hidden;
  BoundCell<V> encoder;
  BoundCell<V> encoder_backward;
  BoundCell<V> decoder;
  V w_y, b_y;
  std::vector<V> leaves;  // parameters in ModelParams::blocks() order
};

template <typename Ops>
BoundModel<typename Ops::Value> bind(Ops& ops, const ModelParams& p) {
  using V = typename Ops::Value;
  BoundModel<V> m;
  m.variant = p.variant;
  m.hidden = p.dims.hidden;
  auto bind_cell = [&](const LstmCellParams& c) {
    BoundCell<V> b{ops.param(c.w_xi), ops.param(c.w_xf), ops.param(c.w_xo), ops.param(c.w_xc),
                   ops.param(c.w_hi), ops.param(c.w_hf), ops.param(c.w_ho), ops.param(c.w_hc),
                   ops.param(c.b_i),  ops.param(c.b_f),  ops.param(c.b_o),  ops.param(c.b_c)};
    if constexpr (std::is_same_v<V, Var>) {
      for (V v : {b.w_xi, b.w_xf, b.w_xo, b.w_xc, b.w_hi, b.w_hf, b.w_ho, b.w_hc, b.b_i, b.b_f,
                  b.b_o, b.b_c})
        m.leaves.push_back(v);
    }
    return b;
  };
  m.encoder = bind_cell(p.encoder);
  if (p.has_backward_encoder()) m.encoder_backward = bind_cell(p.encoder_backward);
  m.decoder = bind_cell(p.decoder);
  m.w_y = ops.param(p.w_y);
  m.b_y = ops.param(p.b_y);
  if constexpr (std::is_same_v<V, Var>) {
    m.leaves.push_back(m.w_y);
    m.leaves.push_back(m.b_y);
  }
  return m;
}

/// One LSTM step with hard-sigmoid gates:
///   i, f, o = hsig(x W_x* + h W_h* + b_*);  c' = f c + i tanh(x W_xc + h W_hc + b_c);
///   h' = o tanh(c').
template <typename Ops, typename V = typename Ops::Value>
std::pair<V, V> lstm_step(Ops& ops, const BoundCell<V>& cell, const V& x, const V& h,
                          const V& c) {
  auto pre = [&](const V& wx, const V& wh, const V& b) {
    return ops.add(ops.add(ops.matmul(x, wx), ops.matmul(h, wh)), b);
  };
  V i = ops.hard_sigmoid(pre(cell.w_xi, cell.w_hi, cell.b_i));
  V f = ops.hard_sigmoid(pre(cell.w_xf, cell.w_hf, cell.b_f));
  V o = ops.hard_sigmoid(pre(cell.w_xo, cell.w_ho, cell.b_o));
  V g = ops.tanh(pre(cell.w_xc, cell.w_hc, cell.b_c));
  V c_next = ops.add(ops.hadamard(f, c), ops.hadamard(i, g));
  V h_next = ops.hadamard(o, ops.tanh(c_next));
  return {std::move(h_next), std::move(c_next)};
}

template <typename V>
struct EncoderRun {
  std::vector<V> hidden;  // per time step, in input time order
  V h, c;                 // final states
};

/// Unrolls a cell over the window from zero states. `reverse` consumes t = T-1 .. 0;
/// the returned hidden sequence is still indexed by input time.
template <typename Ops, typename V = typename Ops::Value>
EncoderRun<V> run_encoder(Ops& ops, const BoundCell<V>& cell, std::size_t hidden,
                          std::span<const V> inputs, bool reverse, bool keep_sequence) {
  const std::size_t batch = ops.value(inputs.front()).rows();
  EncoderRun<V> run;
  run.h = ops.constant(Matrix(batch, hidden));
  run.c = ops.constant(Matrix(batch, hidden));
  if (keep_sequence) run.hidden.resize(inputs.size());
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const std::size_t t = reverse ? inputs.size() - 1 - k : k;
    auto [h, c] = lstm_step(ops, cell, inputs[t], run.h, run.c);
    run.h = std::move(h);
    run.c = std::move(c);
    if (keep_sequence) run.hidden[t] = run.h;
  }
  return run;
}

template <typename V>
struct ForwardResult {
  V y;  // batch x output
  // Attention variant only:
  V alignment;    // batch x T
  V context;      // batch x h
  V attentional;  // batch x 2h, [context | decoder hidden]
};

/// Shared encoder-decoder forward. `steps` are the T input slices (batch x input).
template <typename Ops, typename V = typename Ops::Value>
ForwardResult<V> forward_generic(Ops& ops, const BoundModel<V>& m, std::span<const Matrix> steps) {
  if (steps.empty()) throw ShapeError("forward: empty input window");
  std::vector<V> xs;
  xs.reserve(steps.size());
  for (const Matrix& s : steps) xs.push_back(ops.constant(s));
  const std::size_t h = m.hidden;

  ForwardResult<V> r;
  switch (m.variant) {
    case Variant::vanilla: {
      auto enc = run_encoder(ops, m.encoder, h, std::span<const V>(xs), false, false);
      // RepeatVector(1): the decoder's single input is the encoder's final hidden state.
      auto [h_de, c_de] = lstm_step(ops, m.decoder, enc.h, enc.h, enc.c);
      r.y = ops.add(ops.matmul(h_de, m.w_y), m.b_y);
      break;
    }
    case Variant::bidirectional: {
      auto fwd = run_encoder(ops, m.encoder, h, std::span<const V>(xs), false, false);
      auto bwd = run_encoder(ops, m.encoder_backward, h, std::span<const V>(xs), true, false);
      V concat_h = ops.concat_cols(fwd.h, bwd.h);  // Concat-1
      V concat_c = ops.concat_cols(fwd.c, bwd.c);  // Concat-2
      auto [h_de, c_de] = lstm_step(ops, m.decoder, concat_h, concat_h, concat_c);
      r.y = ops.add(ops.matmul(h_de, m.w_y), m.b_y);
      break;
    }
    case Variant::attention: {
      auto enc = run_encoder(ops, m.encoder, h, std::span<const V>(xs), false, true);
      auto [h_de, c_de] = lstm_step(ops, m.decoder, enc.h, enc.h, enc.c);
      const std::size_t T = enc.hidden.size();
      V ones_col = ops.constant(Matrix(h, 1, 1.0));
      V ones_row = ops.constant(Matrix(1, h, 1.0));
      // Dot-1: score_t = <H_de, H_en_t> per batch row.
      std::vector<V> scores;
      scores.reserve(T);
      for (std::size_t t = 0; t < T; ++t)
        scores.push_back(ops.matmul(ops.hadamard(h_de, enc.hidden[t]), ones_col));
      r.alignment = ops.softmax_rows(ops.concat_cols(std::span<const V>(scores)));
      // Dot-2: context = sum_t a_t H_en_t.
      V context;
      for (std::size_t t = 0; t < T; ++t) {
        V weight = ops.matmul(ops.slice_cols(r.alignment, t, 1), ones_row);
        V term = ops.hadamard(weight, enc.hidden[t]);
        context = t == 0 ? term : ops.add(context, term);
      }
      r.context = context;
      r.attentional = ops.concat_cols(context, h_de);
      r.y = ops.add(ops.matmul(r.attentional, m.w_y), m.b_y);
      break;
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Eager entry points

namespace detail {

inline void check_cell_inputs(const LstmCellParams& p, const Matrix& x, const Matrix& h,
                              const Matrix& c) {
  const std::size_t b = x.rows();
  if (x.cols() != p.input_dim() || h.rows() != b || h.cols() != p.hidden_dim() ||
      c.rows() != b || c.cols() != p.hidden_dim()) {
    throw ShapeError("lstm_step: x " + x.shape_string() + ", h " + h.shape_string() + ", c " +
                     c.shape_string() + " do not conform to a cell with input " +
                     std::to_string(p.input_dim()) + " and hidden " +
                     std::to_string(p.hidden_dim()));
  }
}

inline void check_window(const ModelParams& p, std::span<const Matrix> steps) {
  if (steps.empty()) throw ShapeError("forward: empty input window");
  const std::size_t b = steps.front().rows();
  for (const auto& s : steps) {
    if (s.rows() != b || s.cols() != p.dims.input) {
      throw ShapeError("forward: step " + s.shape_string() + " does not match batch " +
                       std::to_string(b) + " x input " + std::to_string(p.dims.input));
    }
  }
}

inline void require_variant(const ModelParams& p, Variant v, const char* fn) {
  if (p.variant != v) {
    throw ContractError(std::string(fn) + ": parameters are for variant '" +
                        std::string(variant_name(p.variant)) + "'");
  }
}

}  // namespace detail

/// Eager single LSTM step; returns (h_t, c_t).
inline std::pair<Matrix, Matrix> lstm_step(const LstmCellParams& p, const Matrix& x,
                                           const Matrix& h_prev, const Matrix& c_prev) {
  detail::check_cell_inputs(p, x, h_prev, c_prev);
  Eager ops;
  BoundCell<Matrix> cell{p.w_xi, p.w_xf, p.w_xo, p.w_xc, p.w_hi, p.w_hf,
                         p.w_ho, p.w_hc, p.b_i,  p.b_f,  p.b_o,  p.b_c};
  return lstm_step(ops, cell, x, h_prev, c_prev);
}

/// Any variant; returns (batch x output).
inline Matrix forward(const ModelParams& p, std::span<const Matrix> steps) {
  detail::check_window(p, steps);
  Eager ops;
  return forward_generic(ops, bind(ops, p), steps).y;
}

inline Matrix forward_vanilla(const ModelParams& p, std::span<const Matrix> steps) {
  detail::require_variant(p, Variant::vanilla, "forward_vanilla");
  return forward(p, steps);
}

inline Matrix forward_bidirectional(const ModelParams& p, std::span<const Matrix> steps) {
  detail::require_variant(p, Variant::bidirectional, "forward_bidirectional");
  return forward(p, steps);
}

struct AttentionTrace {
  Matrix alignment;    // batch x T
  Matrix context;      // batch x hidden
  Matrix attentional;  // batch x 2 hidden
};

inline std::pair<Matrix, AttentionTrace> forward_attention(const ModelParams& p,
                                                           std::span<const Matrix> steps) {
  detail::require_variant(p, Variant::attention, "forward_attention");
  detail::check_window(p, steps);
  Eager ops;
  auto r = forward_generic(ops, bind(ops, p), steps);
  return {std::move(r.y),
          AttentionTrace{std::move(r.alignment), std::move(r.context), std::move(r.attentional)}};
}

/// Final (h, c) of both encoder directions of a bidirectional model.
struct BidirectionalStates {
  Matrix h_forward, c_forward, h_backward, c_backward;
};

inline BidirectionalStates encode_bidirectional(const ModelParams& p,
                                                std::span<const Matrix> steps) {
  detail::require_variant(p, Variant::bidirectional, "encode_bidirectional");
  detail::check_window(p, steps);
  Eager ops;
  auto m = bind(ops, p);
  auto f = run_encoder(ops, m.encoder, p.dims.hidden, steps, false, false);
  auto b = run_encoder(ops, m.encoder_backward, p.dims.hidden, steps, true, false);
  return {std::move(f.h), std::move(f.c), std::move(b.h), std::move(b.c)};
}

/// Layer table rows: (layer, type, shape, connects-to). Batch is printed as "β".
struct LayerRow {
  std::string layer, type, shape, connect;
};

inline std::vector<LayerRow> layer_table(const ModelParams& p, std::size_t window) {
  const std::string T = std::to_string(window), in = std::to_string(p.dims.input);
  const std::string h = std::to_string(p.dims.hidden), h2 = std::to_string(2 * p.dims.hidden);
  const std::string out = std::to_string(p.dims.output);
  auto b2 = [](const std::string& a) { return "(β, " + a + ")"; };
  auto b3 = [](const std::string& a, const std::string& c) { return "(β, " + a + ", " + c + ")"; };
  const std::string pair = "[" + b2(h) + ", " + b2(h) + "]";
  std::vector<LayerRow> rows = {{"Input", "Input", b3(T, in), ""},
                                {"", "Output", b3(T, in), "Encoder Input"},
                                {"Encoder", "Input", b3(T, in), ""}};
  switch (p.variant) {
    case Variant::vanilla:
      rows.insert(rows.end(), {{"", "Output-1", b2(h), "RepeatVector Input"},
                               {"", "Output-2", pair, "Decoder Input-2"},
                               {"RepeatVector", "Input", b2(h), ""},
                               {"", "Output", b3("1", h), "Decoder Input-1"},
                               {"Decoder", "Input-1", b3("1", h), ""},
                               {"", "Input-2", pair, ""},
                               {"", "Output", b3("1", h), "Dense Input"},
                               {"Dense", "Input", b3("1", h), ""},
                               {"", "Output", b3("1", out), ""}});
      break;
    case Variant::bidirectional:
      rows.insert(rows.end(), {{"", "Output-1", b2(h), "Concat-1 Input"},
                               {"", "Output-2", pair, "Concat-2 Input"},
                               {"Concat-1", "Input", pair, ""},
                               {"", "Output", b2(h2), "RepeatVector Input, Decoder Input-2"},
                               {"Concat-2", "Input", pair, ""},
                               {"", "Output", b2(h2), "Decoder Input-3"},
                               {"RepeatVector", "Input", b2(h2), ""},
                               {"", "Output", b3("1", h2), "Decoder Input-1"},
                               {"Decoder", "Input-1", b3("1", h2), ""},
                               {"", "Input-2", b2(h2), ""},
                               {"", "Input-3", b2(h2), ""},
                               {"", "Output", b3("1", h2), "Dense Input"},
                               {"Dense", "Input", b3("1", h2), ""},
                               {"", "Output", b3("1", out), ""}});
      break;
    case Variant::attention:
      rows.insert(rows.end(), {{"", "Output-1", b2(h), "RepeatVec. Input"},
                               {"", "Output-2", pair, "Decoder Input-2"},
                               {"", "Output-3", b3(T, h), "Dot-1 Input-2, Dot-2 Input-2"},
                               {"RepeatVec.", "Input", b2(h), ""},
                               {"", "Output", b3("1", h), "Decoder Input-1"},
                               {"Decoder", "Input-1", b3("1", h), ""},
                               {"", "Input-2", pair, ""},
                               {"", "Output", b3("1", h), "Dot-1 Input-1, Concat Input-2"},
                               {"Dot-1", "Input-1", b3("1", h), ""},
                               {"", "Input-2", b3(T, h), ""},
                               {"", "Output", b3("1", T), "Dot-2 Input-1 (softmax)"},
                               {"Dot-2", "Input-1", b3("1", T), ""},
                               {"", "Input-2", b3(T, h), ""},
                               {"", "Output", b3("1", h), "Concat Input-1"},
                               {"Concat", "Input-1", b3("1", h), ""},
                               {"", "Input-2", b3("1", h), ""},
                               {"", "Output", b3("1", h2), "Dense Input"},
                               {"Dense", "Input", b3("1", h2), ""},
                               {"", "Output", b3("1", out), ""}});
      break;
  }
  return rows;
}

}  // namespace pmsm
