#include <gtest/gtest.h>

#include <functional>

#include "pmsm/tape.hpp"
#include "support.hpp"

using namespace pmsm;
using pmsm::test::numeric_gradient;
using pmsm::test::random_matrix;

namespace {

// Builds loss = sum(R ∘ op(inputs)) so every output entry gets a distinct weight.
using Builder = std::function<Var(Tape&, std::span<const Var>)>;

void check_op(const Builder& build, std::vector<Matrix> inputs, std::uint64_t seed) {
  Rng rng(seed);
  Matrix weights;
  auto loss_of = [&](std::span<const Matrix> xs, Tape& tape, std::vector<Var>& vars) {
    vars.clear();
    for (const Matrix& x : xs) vars.push_back(tape.param(x));
    Var y = build(tape, vars);
    if (weights.empty()) weights = random_matrix(rng, tape.value(y).rows(), tape.value(y).cols());
    return tape.sum(tape.hadamard(y, tape.constant(weights)));
  };

  Tape tape;
  std::vector<Var> vars;
  Var loss = loss_of(inputs, tape, vars);
  const Gradients g = tape.backward(loss);

  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto f = [&](const Matrix& probe) {
      std::vector<Matrix> xs = inputs;
      xs[k] = probe;
      Tape t;
      std::vector<Var> vs;
      return t.value(loss_of(xs, t, vs))(0, 0);
    };
    const Matrix num = numeric_gradient(f, inputs[k], 1e-6);
    const Matrix& ana = g[vars[k]];
    if (ana.empty()) {
      // Input outside the loss's dependency cone.
      for (double n : num.values()) EXPECT_EQ(n, 0.0);
      continue;
    }
    ASSERT_EQ(ana.rows(), num.rows());
    ASSERT_EQ(ana.cols(), num.cols());
    for (std::size_t i = 0; i < num.size(); ++i) {
      const double a = ana.values()[i], n = num.values()[i];
      if (std::abs(a) <= 1e-6 && std::abs(n) <= 1e-6) continue;
      EXPECT_LT(std::abs(a - n) / std::max(std::abs(a), std::abs(n)), 1e-4)
          << "input " << k << " entry " << i << ": analytic " << a << " numeric " << n;
    }
  }
}

}  // namespace

TEST(Backward, SumGivesAllOnes) {
  Tape tape;
  Var w = tape.param(Matrix{{1, -2, 3}, {4, 5, -6}});
  const Gradients g = tape.backward(tape.sum(w));
  EXPECT_EQ(g[w], Matrix(2, 3, 1.0));
}

TEST(Backward, LeastSquaresClosedForm) {
  const Matrix W0{{0.3, -1.2}, {2.0, 0.7}};
  const Matrix x{{1.5}, {-0.5}};
  const Matrix y{{0.25}, {1.0}};
  Tape tape;
  Var W = tape.param(W0);
  Var r = tape.add(tape.matmul(W, tape.constant(x)), tape.constant(scale(y, -1.0)));
  Var loss = tape.scale(tape.sum(tape.hadamard(r, r)), 0.5);
  const Gradients g = tape.backward(loss);
  const Matrix expected = matmul(add(matmul(W0, x), scale(y, -1.0)), transpose(x));
  EXPECT_LE(max_abs_diff(g[W], expected), 1e-14);
}

TEST(Backward, RejectsNonScalarLoss) {
  Tape tape;
  Var w = tape.param(Matrix(2, 2, 1.0));
  EXPECT_THROW(tape.backward(w), ContractError);
}

TEST(Backward, UnusedParameterGetsNoGradient) {
  Tape tape;
  Var used = tape.param(Matrix(1, 2, 1.0));
  Var unused = tape.param(Matrix(1, 2, 1.0));
  const Gradients g = tape.backward(tape.sum(used));
  EXPECT_TRUE(g[unused].empty());
  EXPECT_FALSE(g[used].empty());
}

TEST(Backward, FanOutAccumulates) {
  Tape tape;
  Var x = tape.param(Matrix{{2.0}});
  Var y = tape.hadamard(x, x);  // x^2
  Var z = tape.add(y, x);       // x^2 + x
  const Gradients g = tape.backward(tape.sum(z));
  EXPECT_EQ(g[x](0, 0), 5.0);
}

TEST(BackwardPrimitives, Matmul) {
  Rng rng(21);
  check_op([](Tape& t, std::span<const Var> v) { return t.matmul(v[0], v[1]); },
           {random_matrix(rng, 3, 4), random_matrix(rng, 4, 2)}, 1);
}

TEST(BackwardPrimitives, AddPlainAndBroadcast) {
  Rng rng(22);
  check_op([](Tape& t, std::span<const Var> v) { return t.add(v[0], v[1]); },
           {random_matrix(rng, 3, 4), random_matrix(rng, 3, 4)}, 2);
  check_op([](Tape& t, std::span<const Var> v) { return t.add(v[0], v[1]); },
           {random_matrix(rng, 5, 4), random_matrix(rng, 1, 4)}, 3);
}

TEST(BackwardPrimitives, Hadamard) {
  Rng rng(23);
  check_op([](Tape& t, std::span<const Var> v) { return t.hadamard(v[0], v[1]); },
           {random_matrix(rng, 3, 4), random_matrix(rng, 3, 4)}, 4);
}

TEST(BackwardPrimitives, Tanh) {
  Rng rng(24);
  check_op([](Tape& t, std::span<const Var> v) { return t.tanh(v[0]); },
           {random_matrix(rng, 4, 4, -2, 2)}, 5);
}

TEST(BackwardPrimitives, HardSigmoidAwayFromKinks) {
  // Keep entries off the kinks at +-2.5 so central differences are valid.
  Rng rng(25);
  Matrix x = random_matrix(rng, 5, 6, -4, 4);
  for (double& v : x.values())
    if (std::abs(std::abs(v) - 2.5) < 0.05) v += 0.2;
  check_op([](Tape& t, std::span<const Var> v) { return t.hard_sigmoid(v[0]); }, {x}, 6);
}

TEST(BackwardPrimitives, HardSigmoidFlatRegionsHaveZeroGradient) {
  Tape tape;
  Var x = tape.param(Matrix{{-5.0, 0.0, 5.0}});
  const Gradients g = tape.backward(tape.sum(tape.hard_sigmoid(x)));
  EXPECT_EQ(g[x], (Matrix{{0.0, 0.2, 0.0}}));
}

TEST(BackwardPrimitives, SoftmaxRows) {
  Rng rng(26);
  check_op([](Tape& t, std::span<const Var> v) { return t.softmax_rows(v[0]); },
           {random_matrix(rng, 3, 7, -3, 3)}, 7);
}

TEST(BackwardPrimitives, ConcatAndSlice) {
  Rng rng(27);
  check_op(
      [](Tape& t, std::span<const Var> v) {
        const Var parts[] = {v[0], v[1], v[2]};
        return t.concat_cols(parts);
      },
      {random_matrix(rng, 2, 3), random_matrix(rng, 2, 1), random_matrix(rng, 2, 4)}, 8);
  check_op([](Tape& t, std::span<const Var> v) { return t.slice_cols(v[0], 2, 3); },
           {random_matrix(rng, 3, 6)}, 9);
}

TEST(BackwardPrimitives, ScaleAndSum) {
  Rng rng(28);
  check_op([](Tape& t, std::span<const Var> v) { return t.scale(v[0], -1.7); },
           {random_matrix(rng, 3, 3)}, 10);
  check_op([](Tape& t, std::span<const Var> v) { return t.sum(t.hadamard(v[0], v[0])); },
           {random_matrix(rng, 3, 3)}, 11);
}

TEST(BackwardPrimitives, RandomCompositions) {
  // Property: random chains of primitives still agree with finite differences.
  Rng shapes(29);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t r = 1 + shapes.below(4), c = 1 + shapes.below(4);
    const std::uint64_t pick = shapes.below(4);
    check_op(
        [pick](Tape& t, std::span<const Var> v) {
          Var a = t.matmul(v[0], v[1]);
          switch (pick) {
            case 0: return t.tanh(t.add(a, v[2]));
            case 1: return t.softmax_rows(t.hadamard(a, a));
            case 2: return t.concat_cols(t.tanh(a), t.scale(a, 0.5));
            default: return t.hadamard(t.tanh(a), t.add(a, v[2]));
          }
        },
        {random_matrix(shapes, r, 3, -0.8, 0.8), random_matrix(shapes, 3, c, -0.8, 0.8),
         random_matrix(shapes, 1, c, -0.8, 0.8)},
        100 + trial);
  }
}

TEST(Backward, FullAttentionModelPassesFiniteDifferences) {
  Rng rng(30);
  const ModelDims dims{3, 5, 4};
  ModelParams p = init_params(Variant::attention, 31, dims);
  for (auto& b : p.blocks())
    for (double& v : b.value->values()) v += rng.uniform(-0.1, 0.1);
  const auto steps = pmsm::test::random_steps(rng, 8, 2, 3);
  const Matrix targets = random_matrix(rng, 2, 4);
  const auto r = pmsm::test::check_model_gradients(p, steps, targets);
  EXPECT_GT(r.checked, count_params(p) / 2);
  EXPECT_EQ(r.failures, 0u) << "worst " << r.worst << " in " << r.worst_block;
}
