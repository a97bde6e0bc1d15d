#include <cmath>
#include <functional>
#include <vector>

#include <gtest/gtest.h>

#include "jcpa/autodiff.hpp"
#include "support.hpp"

namespace jcpa::ad {
namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  Matrix m(r, c);
  for (double& x : m.data()) x = rng.uniform(lo, hi);
  return m;
}

/// Compares the tape gradient of a scalar function of one input against
/// central differences.
void check_gradient(const Matrix& x0, const std::function<Var(Tape&, Var)>& f, double tol = 1e-7) {
  Tape tape;
  const Var x = tape.parameter(x0);
  const Var y = f(tape, x);
  tape.backward(y);
  const Matrix g = tape.grad(x);
  const double h = 1e-6;
  for (std::size_t k = 0; k < x0.size(); ++k) {
    Matrix plus = x0, minus = x0;
    plus.data()[k] += h;
    minus.data()[k] -= h;
    Tape tp(false), tm(false);
    const double fp = tp.value(f(tp, tp.constant(plus)))(0, 0);
    const double fm = tm.value(f(tm, tm.constant(minus)))(0, 0);
    const double fd = (fp - fm) / (2.0 * h);
    EXPECT_NEAR(g.data()[k], fd, tol * std::max(1.0, std::abs(fd))) << "entry " << k;
  }
}

TEST(Tape, SoftmaxGradientOracle) {
  Tape tape;
  const Var x = tape.parameter(Matrix(1, 3, 0.0));
  const Var y = tape.softmax_rows(x);
  const Var pick = tape.sum(tape.mul(y, tape.constant(Matrix(1, 3, std::vector<double>{1.0, 0.0, 0.0}))));
  tape.backward(pick);
  EXPECT_NEAR(tape.grad(x)(0, 0), 2.0 / 9.0, 1e-15);
  EXPECT_NEAR(tape.grad(x)(0, 1), -1.0 / 9.0, 1e-15);
  EXPECT_NEAR(tape.grad(x)(0, 2), -1.0 / 9.0, 1e-15);
}

TEST(Tape, SoftmaxIsStableForLargeInputs) {
  Tape tape(false);
  const Var y = tape.softmax_rows(tape.constant(Matrix(1, 2, std::vector<double>{1000.0, 0.0})));
  EXPECT_EQ(tape.value(y)(0, 0), 1.0);
  EXPECT_EQ(tape.value(y)(0, 1), 0.0);
  const Var s = tape.sigmoid(tape.constant(Matrix(1, 2, std::vector<double>{-800.0, 800.0})));
  EXPECT_EQ(tape.value(s)(0, 0), 0.0);
  EXPECT_EQ(tape.value(s)(0, 1), 1.0);
}

TEST(Tape, SegmentSumOracle) {
  Tape tape;
  const Var x = tape.parameter(Matrix(4, 2, std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8}));
  const std::vector<std::size_t> seg{1, 0, 1, 1};
  const Var s = tape.segment_sum(x, seg, 3);
  const Matrix& v = tape.value(s);
  EXPECT_EQ(v, Matrix(3, 2, std::vector<double>{3, 4, 13, 16, 0, 0}));
  const Var w = tape.constant(Matrix(3, 2, std::vector<double>{1, 2, 3, 4, 5, 6}));
  tape.backward(tape.sum(tape.mul(s, w)));
  EXPECT_EQ(tape.grad(x), Matrix(4, 2, std::vector<double>{3, 4, 1, 2, 3, 4, 3, 4}));
}

TEST(Tape, GatherRowsAccumulatesRepeatedIndices) {
  Tape tape;
  const Var x = tape.parameter(Matrix(2, 1, std::vector<double>{5, 7}));
  const std::vector<std::size_t> idx{1, 1, 0, 1};
  const Var y = tape.gather_rows(x, idx);
  EXPECT_EQ(tape.value(y), Matrix(4, 1, std::vector<double>{7, 7, 5, 7}));
  tape.backward(tape.sum(y));
  EXPECT_EQ(tape.grad(x), Matrix(2, 1, std::vector<double>{1, 3}));
}

TEST(Tape, ElementwiseOpsMatchFiniteDifferences) {
  const Matrix x0 = random_matrix(3, 2, 1, 0.2, 2.0);
  const Matrix c = random_matrix(3, 2, 2, 0.5, 1.5);
  check_gradient(x0, [&](Tape& t, Var x) { return t.sum(t.mul(x, t.constant(c))); });
  check_gradient(x0, [&](Tape& t, Var x) { return t.sum(t.div(t.constant(c), x)); });
  check_gradient(x0, [&](Tape& t, Var x) { return t.sum(t.div(x, t.add_scalar(t.mul(x, x), 1.0))); });
  check_gradient(x0, [&](Tape& t, Var x) { return t.sum(t.log(t.add_scalar(t.scale(x, 3.0), 0.5))); });
  check_gradient(x0, [&](Tape& t, Var x) { return t.sum(t.mul(t.sigmoid(x), t.constant(c))); });
  check_gradient(x0, [&](Tape& t, Var x) { return t.sum(t.mul(t.softmax_rows(x), t.constant(c))); });
}

TEST(Tape, StructuralOpsMatchFiniteDifferences) {
  const Matrix x0 = random_matrix(4, 3, 3);
  const Matrix w = random_matrix(3, 2, 4);
  const Matrix c = random_matrix(4, 1, 5);
  const Matrix r = random_matrix(1, 3, 6);
  check_gradient(x0, [&](Tape& t, Var x) { return t.sum(t.matmul(x, t.constant(w))); });
  check_gradient(x0, [&](Tape& t, Var x) {
    const Var y = t.matmul(x, t.constant(w));
    return t.sum(t.mul(y, y));
  });
  check_gradient(x0, [&](Tape& t, Var x) { return t.sum(t.mul_col(t.mul(x, x), t.constant(c))); });
  check_gradient(x0, [&](Tape& t, Var x) { return t.sum(t.mul(t.add_row(x, t.constant(r)), x)); });
  check_gradient(x0, [&](Tape& t, Var x) {
    const Var a = t.slice_rows(x, 1, 3);
    const Var b = t.concat_cols({a, t.mul(a, a)});
    return t.sum(t.mul(t.reshape(b, 3, 4), t.reshape(b, 3, 4)));
  });
  check_gradient(x0, [&](Tape& t, Var x) {
    const Var col = t.slice_rows(t.reshape(x, 12, 1), 0, 4);
    return t.sum(t.mul_col(t.constant(Matrix(4, 2, 1.5)), t.mul(col, col)));
  });
}

TEST(Tape, ReluSubgradientAtZeroIsZero) {
  Tape tape;
  const Var x = tape.parameter(Matrix(1, 3, std::vector<double>{-1.0, 0.0, 2.0}));
  tape.backward(tape.sum(tape.relu(x)));
  EXPECT_EQ(tape.grad(x), Matrix(1, 3, std::vector<double>{0.0, 0.0, 1.0}));
}

TEST(Tape, ChannelInterferenceOracle) {
  const auto inst = test::instance(4, 2, 21);
  const Matrix q0 = random_matrix(4, 2, 7, 0.0, 1.0);
  Tape tape(false);
  const Matrix out = tape.value(tape.channel_interference(tape.constant(q0), inst.gains));
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t m = 0; m < 2; ++m) {
      double s = 0.0;
      for (std::size_t j = 0; j < 4; ++j) {
        if (j != i) s += inst.gains(i, j, m) * q0(j, m);
      }
      EXPECT_NEAR(out(i, m), s, 1e-20);
    }
  }
  const Matrix c = random_matrix(4, 2, 8);
  Matrix scaled(4, 2);
  // Rescale so the gradient check works in well-conditioned units.
  for (std::size_t k = 0; k < 8; ++k) scaled.data()[k] = c.data()[k] * 1e6;
  check_gradient(q0, [&](Tape& t, Var q) { return t.sum(t.mul(t.channel_interference(q, inst.gains), t.constant(scaled))); });
}

TEST(Tape, BackwardIsIdempotent) {
  Tape tape;
  const Var x = tape.parameter(Matrix(2, 2, 1.5));
  const Var y = tape.sum(tape.mul(x, x));
  tape.backward(y);
  const Matrix first = tape.grad(x);
  tape.backward(y);
  EXPECT_EQ(tape.grad(x), first);
  EXPECT_EQ(first, Matrix(2, 2, 3.0));
}

TEST(Tape, ShapeAndModeErrors) {
  Tape tape;
  const Var a = tape.parameter(Matrix(2, 3));
  const Var b = tape.parameter(Matrix(2, 2));
  EXPECT_THROW(tape.matmul(a, b), ShapeError);
  EXPECT_THROW(tape.add(a, b), ShapeError);
  EXPECT_THROW(tape.reshape(a, 4, 2), ShapeError);
  EXPECT_THROW(tape.slice_rows(a, 1, 3), ShapeError);
  EXPECT_THROW(tape.backward(a), ShapeError);
  Tape inference(false);
  const Var s = inference.sum(inference.parameter(Matrix(1, 1, 2.0)));
  EXPECT_THROW(inference.backward(s), std::logic_error);
}

TEST(Mlp, ScalarChainOracle) {
  // 1 -> 1 -> 1 with ReLU: y = w2 * relu(w1 x + b1) + b2.
  MlpParams p;
  p.layers.push_back({Matrix(1, 1, 2.0), Matrix(1, 1, -1.0)});
  p.layers.push_back({Matrix(1, 1, 3.0), Matrix(1, 1, 0.5)});
  Tape tape;
  const MlpVars v = bind(tape, p);
  const Var x = tape.parameter(Matrix(1, 1, 1.5));
  const Var y = mlp_forward(tape, v, x);
  EXPECT_DOUBLE_EQ(tape.value(y)(0, 0), 3.0 * (2.0 * 1.5 - 1.0) + 0.5);
  tape.backward(y);
  EXPECT_DOUBLE_EQ(tape.grad(x)(0, 0), 6.0);
  EXPECT_DOUBLE_EQ(tape.grad(v.layers[0].first)(0, 0), 3.0 * 1.5);
  EXPECT_DOUBLE_EQ(tape.grad(v.layers[0].second)(0, 0), 3.0);
  EXPECT_DOUBLE_EQ(tape.grad(v.layers[1].first)(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(tape.grad(v.layers[1].second)(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(mlp_forward(p, Matrix(1, 1, -3.0))(0, 0), 0.5);
}

TEST(Mlp, TapeFreeForwardMatchesTape) {
  Rng rng(5);
  const std::vector<std::size_t> dims{5, 7, 3};
  for (Activation act : {Activation::kIdentity, Activation::kSoftmax, Activation::kSigmoid}) {
    MlpParams p = init_mlp(dims, act, rng);
    for (auto& l : p.layers) {
      for (double& b : l.bias.data()) b = rng.uniform(-0.5, 0.5);
    }
    const Matrix x = random_matrix(6, 5, 31);
    Tape tape(false);
    const Matrix a = tape.value(mlp_forward(tape, bind(tape, p), tape.constant(x)));
    const Matrix b = mlp_forward(p, x);
    ASSERT_TRUE(a.same_shape(b));
    for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(a.data()[k], b.data()[k], 1e-14);
  }
  const MlpParams p = init_mlp(dims, Activation::kIdentity, rng);
  EXPECT_THROW(mlp_forward(p, Matrix(1, 4)), ShapeError);
}

TEST(Mlp, GlorotInitBoundsAndZeroBias) {
  Rng rng(1);
  const std::vector<std::size_t> dims{7, 16, 32};
  const MlpParams p = init_mlp(dims, Activation::kIdentity, rng);
  ASSERT_EQ(p.layers.size(), 2u);
  const double bound = std::sqrt(6.0 / 23.0);
  for (double w : p.layers[0].weight.data()) EXPECT_LE(std::abs(w), bound);
  for (double b : p.layers[0].bias.data()) EXPECT_EQ(b, 0.0);
  EXPECT_EQ(p.in_dim(), 7u);
  EXPECT_EQ(p.out_dim(), 32u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  std::vector<double> params{1.0, -2.0, 0.5};
  const std::vector<double> grads{0.3, -4.0, 0.0};
  AdamState state;
  AdamConfig cfg;
  adam_step(params, grads, state, cfg);
  // Bias correction makes the first step lr * g / (|g| + eps).
  EXPECT_NEAR(params[0], 1.0 - cfg.lr * 0.3 / (0.3 + cfg.eps), 1e-15);
  EXPECT_NEAR(params[1], -2.0 + cfg.lr * 4.0 / (4.0 + cfg.eps), 1e-15);
  EXPECT_EQ(params[2], 0.5);
  EXPECT_EQ(state.step, 1u);
}

TEST(Adam, SecondStepOracle) {
  std::vector<double> p{0.0};
  AdamState s;
  const AdamConfig cfg;
  adam_step(p, std::vector<double>{1.0}, s, cfg);
  adam_step(p, std::vector<double>{-1.0}, s, cfg);
  const double m = (0.9 * 0.1 - 0.1) / (1.0 - 0.81);
  const double v = (0.999 * 0.001 + 0.001) / (1.0 - 0.999 * 0.999);
  EXPECT_NEAR(p[0], -cfg.lr / (1.0 + cfg.eps) - cfg.lr * m / (std::sqrt(v) + cfg.eps), 1e-12);
}

TEST(Adam, MinimizesAQuadratic) {
  std::vector<double> x{3.0, -1.0};
  AdamState s;
  AdamConfig cfg;
  cfg.lr = 0.05;
  for (int it = 0; it < 2000; ++it) {
    const std::vector<double> g{2.0 * (x[0] - 1.0), 2.0 * (x[1] + 2.0)};
    adam_step(x, g, s, cfg);
  }
  EXPECT_NEAR(x[0], 1.0, 1e-3);
  EXPECT_NEAR(x[1], -2.0, 1e-3);
  EXPECT_THROW(adam_step(x, std::vector<double>{1.0}, s, cfg), ShapeError);
}

}  // namespace
}  // namespace jcpa::ad
