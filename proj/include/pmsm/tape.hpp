#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pmsm/error.hpp"
#include "pmsm/matrix.hpp"

namespace pmsm {

enum class OpKind : std::uint8_t {
  leaf,
  matmul,
  add,
  hadamard,
  tanh,
  hard_sigmoid,
  softmax_rows,
  concat_cols,
  slice_cols,
  scale,
  sum_reduce,
};

/// Handle to a node recorded on a Tape.
struct Var {
  std::size_t id = 0;
};

/// One recorded primitive. `value` is the forward result; the backward rules read the
/// values of the inputs (matmul, hadamard) or of the node itself (tanh, hard_sigmoid,
/// softmax_rows).
struct TapeNode {
  OpKind op = OpKind::leaf;
  std::vector<std::size_t> inputs;
  Matrix value;
  double scalar = 0.0;       // scale factor
  std::size_t offset = 0;    // slice_cols start column
  bool requires_grad = false;
};

/// Gradient of the loss with respect to every node that requires one. Entries for
/// nodes outside the loss's dependency cone are empty matrices.
class Gradients {
public:
  explicit Gradients(std::vector<Matrix> g) : grads_(std::move(g)) {}
  const Matrix& operator[](Var v) const { return grads_.at(v.id); }
  const Matrix& at(std::size_t id) const { return grads_.at(id); }
  std::size_t size() const noexcept { return grads_.size(); }

private:
  std::vector<Matrix> grads_;
};

/// Define-by-run reverse-mode tape. Nodes are appended in evaluation order, so the
/// node list is topologically sorted by construction and backward is a reverse sweep.
/// A tape is single-owner; build a fresh one per batch.
class Tape {
public:
  using Value = Var;

  Var leaf(Matrix m, bool requires_grad) {
    TapeNode n;
    n.value = std::move(m);
    n.requires_grad = requires_grad;
    return push(std::move(n));
  }
  Var param(const Matrix& m) { return leaf(m, true); }
  Var constant(Matrix m) { return leaf(std::move(m), false); }

  const Matrix& value(Var v) const { return nodes_.at(v.id).value; }
  const TapeNode& node(Var v) const { return nodes_.at(v.id); }
  std::size_t size() const noexcept { return nodes_.size(); }

  Var matmul(Var a, Var b) {
    return record(OpKind::matmul, {a.id, b.id}, pmsm::matmul(value(a), value(b)));
  }
  Var add(Var a, Var b) {
    return record(OpKind::add, {a.id, b.id}, pmsm::add(value(a), value(b)));
  }
  Var hadamard(Var a, Var b) {
    return record(OpKind::hadamard, {a.id, b.id}, pmsm::hadamard(value(a), value(b)));
  }
  Var tanh(Var a) { return record(OpKind::tanh, {a.id}, pmsm::tanh(value(a))); }
  Var hard_sigmoid(Var a) {
    return record(OpKind::hard_sigmoid, {a.id}, pmsm::hard_sigmoid(value(a)));
  }
  Var softmax_rows(Var a) {
    return record(OpKind::softmax_rows, {a.id}, pmsm::softmax_rows(value(a)));
  }
  Var concat_cols(std::span<const Var> parts) {
    std::vector<const Matrix*> ms;
    std::vector<std::size_t> ids;
    for (Var p : parts) {
      ms.push_back(&value(p));
      ids.push_back(p.id);
    }
    return record(OpKind::concat_cols, std::move(ids), pmsm::concat_cols(ms));
  }
  Var concat_cols(Var a, Var b) {
    const Var parts[] = {a, b};
    return concat_cols(parts);
  }
  Var slice_cols(Var a, std::size_t begin, std::size_t count) {
    Var v = record(OpKind::slice_cols, {a.id}, pmsm::slice_cols(value(a), begin, count));
    nodes_[v.id].offset = begin;
    return v;
  }
  Var scale(Var a, double s) {
    Var v = record(OpKind::scale, {a.id}, pmsm::scale(value(a), s));
    nodes_[v.id].scalar = s;
    return v;
  }
  Var sum(Var a) {
    return record(OpKind::sum_reduce, {a.id}, Matrix(1, 1, pmsm::sum(value(a))));
  }

  /// Reverse sweep from a 1x1 loss node.
  Gradients backward(Var loss) const {
    const TapeNode& ln = nodes_.at(loss.id);
    if (ln.value.rows() != 1 || ln.value.cols() != 1) {
      throw ContractError("backward: loss must be 1x1, got " + ln.value.shape_string());
    }
    std::vector<Matrix> grads(nodes_.size());
    grads[loss.id] = Matrix(1, 1, 1.0);
    for (std::size_t k = loss.id + 1; k-- > 0;) {
      const TapeNode& n = nodes_[k];
      if (n.op == OpKind::leaf || !n.requires_grad || grads[k].empty()) continue;
      propagate(n, grads[k], grads);
      grads[k] = Matrix();  // interior gradients are not reported
    }
    return Gradients(std::move(grads));
  }

private:
  Var push(TapeNode n) {
    nodes_.push_back(std::move(n));
    return Var{nodes_.size() - 1};
  }

  Var record(OpKind op, std::vector<std::size_t> inputs, Matrix out) {
    TapeNode n;
    n.op = op;
    for (std::size_t i : inputs) n.requires_grad = n.requires_grad || nodes_[i].requires_grad;
    n.inputs = std::move(inputs);
    n.value = std::move(out);
    return push(std::move(n));
  }

  bool wants(std::size_t id) const { return nodes_[id].requires_grad; }

  static void accumulate(Matrix& slot, Matrix g) {
    if (slot.empty())
      slot = std::move(g);
    else
      slot += g;
  }

  void propagate(const TapeNode& n, const Matrix& g, std::vector<Matrix>& grads) const {
    switch (n.op) {
      case OpKind::leaf:
        break;
      case OpKind::matmul: {
        const std::size_t a = n.inputs[0], b = n.inputs[1];
        if (wants(a)) accumulate(grads[a], matmul_nt(g, nodes_[b].value));
        if (wants(b)) accumulate(grads[b], matmul_tn(nodes_[a].value, g));
        break;
      }
      case OpKind::add: {
        const std::size_t a = n.inputs[0], b = n.inputs[1];
        if (wants(a)) accumulate(grads[a], g);
        if (wants(b)) {
          const Matrix& bv = nodes_[b].value;
          if (bv.same_shape(g)) {
            accumulate(grads[b], g);
          } else {
            Matrix colsum(1, g.cols());
            for (std::size_t i = 0; i < g.rows(); ++i)
              for (std::size_t j = 0; j < g.cols(); ++j) colsum(0, j) += g(i, j);
            accumulate(grads[b], std::move(colsum));
          }
        }
        break;
      }
      case OpKind::hadamard: {
        const std::size_t a = n.inputs[0], b = n.inputs[1];
        if (wants(a)) accumulate(grads[a], pmsm::hadamard(g, nodes_[b].value));
        if (wants(b)) accumulate(grads[b], pmsm::hadamard(g, nodes_[a].value));
        break;
      }
      case OpKind::tanh: {
        Matrix d = g;
        const double* y = n.value.data();
        for (std::size_t i = 0; i < d.size(); ++i) d.data()[i] *= 1.0 - y[i] * y[i];
        accumulate(grads[n.inputs[0]], std::move(d));
        break;
      }
      case OpKind::hard_sigmoid: {
        // Slope 0.2 strictly inside the ramp; 0 on the flats and at the kinks.
        Matrix d = g;
        const double* y = n.value.data();
        for (std::size_t i = 0; i < d.size(); ++i)
          d.data()[i] *= (y[i] > 0.0 && y[i] < 1.0) ? 0.2 : 0.0;
        accumulate(grads[n.inputs[0]], std::move(d));
        break;
      }
      case OpKind::softmax_rows: {
        Matrix d(g.rows(), g.cols());
        for (std::size_t i = 0; i < g.rows(); ++i) {
          double dot = 0.0;
          for (std::size_t j = 0; j < g.cols(); ++j) dot += g(i, j) * n.value(i, j);
          for (std::size_t j = 0; j < g.cols(); ++j) d(i, j) = n.value(i, j) * (g(i, j) - dot);
        }
        accumulate(grads[n.inputs[0]], std::move(d));
        break;
      }
      case OpKind::concat_cols: {
        std::size_t offset = 0;
        for (std::size_t in : n.inputs) {
          const std::size_t w = nodes_[in].value.cols();
          if (wants(in)) accumulate(grads[in], pmsm::slice_cols(g, offset, w));
          offset += w;
        }
        break;
      }
      case OpKind::slice_cols: {
        const std::size_t in = n.inputs[0];
        const Matrix& src = nodes_[in].value;
        Matrix d(src.rows(), src.cols());
        for (std::size_t i = 0; i < g.rows(); ++i)
          for (std::size_t j = 0; j < g.cols(); ++j) d(i, n.offset + j) = g(i, j);
        accumulate(grads[in], std::move(d));
        break;
      }
      case OpKind::scale:
        accumulate(grads[n.inputs[0]], pmsm::scale(g, n.scalar));
        break;
      case OpKind::sum_reduce: {
        const Matrix& src = nodes_[n.inputs[0]].value;
        accumulate(grads[n.inputs[0]], Matrix(src.rows(), src.cols(), g(0, 0)));
        break;
      }
    }
  }

  std::vector<TapeNode> nodes_;
};

/// Tape-free backend with the same surface as Tape; used for inference.
struct Eager {
  using Value = Matrix;

  Matrix param(const Matrix& m) const { return m; }
  Matrix constant(Matrix m) const { return m; }
  const Matrix& value(const Matrix& m) const { return m; }

  Matrix matmul(const Matrix& a, const Matrix& b) const { return pmsm::matmul(a, b); }
  Matrix add(const Matrix& a, const Matrix& b) const { return pmsm::add(a, b); }
  Matrix hadamard(const Matrix& a, const Matrix& b) const { return pmsm::hadamard(a, b); }
  Matrix tanh(const Matrix& a) const { return pmsm::tanh(a); }
  Matrix hard_sigmoid(const Matrix& a) const { return pmsm::hard_sigmoid(a); }
  Matrix softmax_rows(const Matrix& a) const { return pmsm::softmax_rows(a); }
  Matrix concat_cols(std::span<const Matrix> parts) const {
    std::vector<const Matrix*> ps;
    for (const Matrix& p : parts) ps.push_back(&p);
    return pmsm::concat_cols(ps);
  }
  Matrix concat_cols(const Matrix& a, const Matrix& b) const { return pmsm::concat_cols(a, b); }
  Matrix slice_cols(const Matrix& a, std::size_t begin, std::size_t count) const {
    return pmsm::slice_cols(a, begin, count);
  }
  Matrix scale(const Matrix& a, double s) const { return pmsm::scale(a, s); }
  Matrix sum(const Matrix& a) const { return Matrix(1, 1, pmsm::sum(a)); }
};

}  // namespace pmsm
