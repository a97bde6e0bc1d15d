#pragma once

// Minimal dense reverse-mode automatic differentiation.
//
// A Tape owns every tensor of one computation. Operations append a node that
// holds the forward value and a closure propagating the output gradient to
// its inputs; backward() replays the closures in exact reverse order. All
// tensors are 2-D (scalars are 1x1) and double precision.
//
// A tape constructed with `record = false` evaluates forward values only;
// it is the inference path and allocates no gradient storage.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "jcpa/matrix.hpp"
#include "jcpa/network.hpp"
#include "jcpa/random.hpp"

namespace jcpa::ad {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Handle to a tensor stored on a Tape.
struct Var {
  std::size_t id = 0;
};

class Tape {
 public:
  explicit Tape(bool record = true) : record_(record) {}

  bool recording() const noexcept { return record_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  Var constant(Matrix value) { return push(std::move(value), false, {}); }
  Var parameter(Matrix value) { return push(std::move(value), record_, {}); }

  const Matrix& value(Var v) const { return nodes_.at(v.id).value; }
  const Matrix& grad(Var v) const { return nodes_.at(v.id).grad; }
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }

  /// Populates gradients of every requires-grad tensor w.r.t. the scalar
  /// `loss`. Gradients are reset first, so calling it again is idempotent.
  void backward(Var loss) {
    if (!record_) throw std::logic_error("backward: tape was not recording");
    const Matrix& lv = value(loss);
    if (lv.rows() != 1 || lv.cols() != 1) {
      throw ShapeError("backward: loss must be scalar (1x1), got " + lv.shape_string());
    }
    for (auto& n : nodes_) {
      if (n.requires_grad) {
        n.grad = Matrix(n.value.rows(), n.value.cols(), 0.0);
      } else {
        n.grad = Matrix();
      }
    }
    if (!nodes_[loss.id].requires_grad) return;
    nodes_[loss.id].grad(0, 0) = 1.0;
    for (std::size_t k = loss.id + 1; k-- > 0;) {
      Node& n = nodes_[k];
      if (n.requires_grad && n.backprop) n.backprop(*this, n.grad);
    }
  }

  // ---- linear algebra -----------------------------------------------------

  Var matmul(Var a, Var b) {
    const Matrix& A = value(a);
    const Matrix& B = value(b);
    if (A.cols() != B.rows()) {
      throw ShapeError("matmul: expected inner dims to agree, got " + A.shape_string() + " * " + B.shape_string());
    }
    Matrix out(A.rows(), B.cols(), 0.0);
    gemm(A, false, B, false, out);
    return unary_or_binary(std::move(out), a, b, [a, b](Tape& t, const Matrix& g) {
      if (t.requires_grad(a)) gemm(g, false, t.value(b), true, t.grad_mut(a));
      if (t.requires_grad(b)) gemm(t.value(a), true, g, false, t.grad_mut(b));
    });
  }

  Var add(Var a, Var b) {
    const Matrix& A = value(a);
    const Matrix& B = value(b);
    require_same("add", A, B);
    Matrix out = A;
    for (std::size_t k = 0; k < out.size(); ++k) out.data()[k] += B.data()[k];
    return unary_or_binary(std::move(out), a, b, [a, b](Tape& t, const Matrix& g) {
      if (t.requires_grad(a)) accumulate(t.grad_mut(a), g);
      if (t.requires_grad(b)) accumulate(t.grad_mut(b), g);
    });
  }

  /// Elementwise product.
  Var mul(Var a, Var b) {
    const Matrix& A = value(a);
    const Matrix& B = value(b);
    require_same("mul", A, B);
    Matrix out = A;
    for (std::size_t k = 0; k < out.size(); ++k) out.data()[k] *= B.data()[k];
    return unary_or_binary(std::move(out), a, b, [a, b](Tape& t, const Matrix& g) {
      const auto& av = t.value(a).data();
      const auto& bv = t.value(b).data();
      if (t.requires_grad(a)) {
        auto& ga = t.grad_mut(a).data();
        for (std::size_t k = 0; k < ga.size(); ++k) ga[k] += g.data()[k] * bv[k];
      }
      if (t.requires_grad(b)) {
        auto& gb = t.grad_mut(b).data();
        for (std::size_t k = 0; k < gb.size(); ++k) gb[k] += g.data()[k] * av[k];
      }
    });
  }

  /// Elementwise quotient.
  Var div(Var a, Var b) {
    const Matrix& A = value(a);
    const Matrix& B = value(b);
    require_same("div", A, B);
    Matrix out = A;
    for (std::size_t k = 0; k < out.size(); ++k) out.data()[k] /= B.data()[k];
    return unary_or_binary(std::move(out), a, b, [a, b](Tape& t, const Matrix& g) {
      const auto& av = t.value(a).data();
      const auto& bv = t.value(b).data();
      if (t.requires_grad(a)) {
        auto& ga = t.grad_mut(a).data();
        for (std::size_t k = 0; k < ga.size(); ++k) ga[k] += g.data()[k] / bv[k];
      }
      if (t.requires_grad(b)) {
        auto& gb = t.grad_mut(b).data();
        for (std::size_t k = 0; k < gb.size(); ++k) gb[k] -= g.data()[k] * av[k] / (bv[k] * bv[k]);
      }
    });
  }

  /// a (n x c) + bias (1 x c) broadcast over rows.
  Var add_row(Var a, Var bias) {
    const Matrix& A = value(a);
    const Matrix& b = value(bias);
    if (b.rows() != 1 || b.cols() != A.cols()) {
      throw ShapeError("add_row: expected bias 1x" + std::to_string(A.cols()) + ", got " + b.shape_string());
    }
    Matrix out = A;
    for (std::size_t r = 0; r < out.rows(); ++r) {
      double* o = out.row(r);
      for (std::size_t c = 0; c < out.cols(); ++c) o[c] += b(0, c);
    }
    return unary_or_binary(std::move(out), a, bias, [a, bias](Tape& t, const Matrix& g) {
      if (t.requires_grad(a)) accumulate(t.grad_mut(a), g);
      if (t.requires_grad(bias)) {
        Matrix& gb = t.grad_mut(bias);
        for (std::size_t r = 0; r < g.rows(); ++r) {
          for (std::size_t c = 0; c < g.cols(); ++c) gb(0, c) += g(r, c);
        }
      }
    });
  }

  /// a (n x c) scaled row-wise by col (n x 1).
  Var mul_col(Var a, Var col) {
    const Matrix& A = value(a);
    const Matrix& v = value(col);
    if (v.cols() != 1 || v.rows() != A.rows()) {
      throw ShapeError("mul_col: expected column " + std::to_string(A.rows()) + "x1, got " + v.shape_string());
    }
    Matrix out = A;
    for (std::size_t r = 0; r < out.rows(); ++r) {
      for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) *= v(r, 0);
    }
    return unary_or_binary(std::move(out), a, col, [a, col](Tape& t, const Matrix& g) {
      const Matrix& av = t.value(a);
      const Matrix& cv = t.value(col);
      if (t.requires_grad(a)) {
        Matrix& ga = t.grad_mut(a);
        for (std::size_t r = 0; r < g.rows(); ++r) {
          for (std::size_t c = 0; c < g.cols(); ++c) ga(r, c) += g(r, c) * cv(r, 0);
        }
      }
      if (t.requires_grad(col)) {
        Matrix& gc = t.grad_mut(col);
        for (std::size_t r = 0; r < g.rows(); ++r) {
          double s = 0.0;
          for (std::size_t c = 0; c < g.cols(); ++c) s += g(r, c) * av(r, c);
          gc(r, 0) += s;
        }
      }
    });
  }

  Var scale(Var a, double s) {
    Matrix out = value(a);
    for (double& x : out.data()) x *= s;
    return unary(std::move(out), a, [a, s](Tape& t, const Matrix& g) {
      auto& ga = t.grad_mut(a).data();
      for (std::size_t k = 0; k < ga.size(); ++k) ga[k] += s * g.data()[k];
    });
  }

  Var add_scalar(Var a, double s) {
    Matrix out = value(a);
    for (double& x : out.data()) x += s;
    return unary(std::move(out), a, [a](Tape& t, const Matrix& g) { accumulate(t.grad_mut(a), g); });
  }

  /// Natural logarithm.
  Var log(Var a) {
    Matrix out = value(a);
    for (double& x : out.data()) x = std::log(x);
    return unary(std::move(out), a, [a](Tape& t, const Matrix& g) {
      const auto& av = t.value(a).data();
      auto& ga = t.grad_mut(a).data();
      for (std::size_t k = 0; k < ga.size(); ++k) ga[k] += g.data()[k] / av[k];
    });
  }

  /// Sum of all entries as a 1x1 tensor.
  Var sum(Var a) {
    double s = 0.0;
    for (double x : value(a).data()) s += x;
    return unary(Matrix(1, 1, s), a, [a](Tape& t, const Matrix& g) {
      for (double& x : t.grad_mut(a).data()) x += g(0, 0);
    });
  }

  // ---- activations --------------------------------------------------------

  Var relu(Var a) {
    Matrix out = value(a);
    for (double& x : out.data()) x = x > 0.0 ? x : 0.0;
    return unary(std::move(out), a, [a](Tape& t, const Matrix& g) {
      const auto& av = t.value(a).data();
      auto& ga = t.grad_mut(a).data();
      for (std::size_t k = 0; k < ga.size(); ++k) {
        if (av[k] > 0.0) ga[k] += g.data()[k];
      }
    });
  }

  Var sigmoid(Var a) {
    Matrix out = value(a);
    for (double& x : out.data()) x = stable_sigmoid(x);
    const std::size_t self = nodes_.size();
    return unary(std::move(out), a, [a, self](Tape& t, const Matrix& g) {
      const auto& y = t.nodes_[self].value.data();
      auto& ga = t.grad_mut(a).data();
      for (std::size_t k = 0; k < ga.size(); ++k) ga[k] += g.data()[k] * y[k] * (1.0 - y[k]);
    });
  }

  /// Row-wise softmax with max subtraction.
  Var softmax_rows(Var a) {
    const Matrix& A = value(a);
    Matrix out(A.rows(), A.cols());
    for (std::size_t r = 0; r < A.rows(); ++r) softmax_row(A.row(r), out.row(r), A.cols());
    const std::size_t self = nodes_.size();
    return unary(std::move(out), a, [a, self](Tape& t, const Matrix& g) {
      const Matrix& y = t.nodes_[self].value;
      Matrix& ga = t.grad_mut(a);
      for (std::size_t r = 0; r < y.rows(); ++r) {
        double dot = 0.0;
        for (std::size_t c = 0; c < y.cols(); ++c) dot += g(r, c) * y(r, c);
        for (std::size_t c = 0; c < y.cols(); ++c) ga(r, c) += y(r, c) * (g(r, c) - dot);
      }
    });
  }

  // ---- structure ----------------------------------------------------------

  Var concat_cols(std::span<const Var> parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no inputs");
    const std::size_t rows = value(parts[0]).rows();
    std::size_t cols = 0;
    for (Var p : parts) {
      if (value(p).rows() != rows) {
        throw ShapeError("concat_cols: expected " + std::to_string(rows) + " rows, got " + value(p).shape_string());
      }
      cols += value(p).cols();
    }
    Matrix out(rows, cols);
    std::size_t off = 0;
    bool any_grad = false;
    for (Var p : parts) {
      const Matrix& P = value(p);
      for (std::size_t r = 0; r < rows; ++r) std::copy(P.row(r), P.row(r) + P.cols(), out.row(r) + off);
      off += P.cols();
      any_grad = any_grad || requires_grad(p);
    }
    std::vector<Var> ins(parts.begin(), parts.end());
    return push(std::move(out), record_ && any_grad, [ins](Tape& t, const Matrix& g) {
      std::size_t o = 0;
      for (Var p : ins) {
        const std::size_t pc = t.value(p).cols();
        if (t.requires_grad(p)) {
          Matrix& gp = t.grad_mut(p);
          for (std::size_t r = 0; r < g.rows(); ++r) {
            for (std::size_t c = 0; c < pc; ++c) gp(r, c) += g(r, o + c);
          }
        }
        o += pc;
      }
    });
  }

  Var concat_cols(std::initializer_list<Var> parts) {
    return concat_cols(std::span<const Var>(parts.begin(), parts.size()));
  }

  /// Same values, new shape (row-major order preserved).
  Var reshape(Var a, std::size_t rows, std::size_t cols) {
    const Matrix& A = value(a);
    if (rows * cols != A.size()) {
      throw ShapeError("reshape: cannot view " + A.shape_string() + " as " + std::to_string(rows) + "x" +
                       std::to_string(cols));
    }
    return unary(Matrix(rows, cols, A.data()), a, [a](Tape& t, const Matrix& g) {
      auto& ga = t.grad_mut(a).data();
      for (std::size_t k = 0; k < ga.size(); ++k) ga[k] += g.data()[k];
    });
  }

  /// Rows [begin, end) of a.
  Var slice_rows(Var a, std::size_t begin, std::size_t end) {
    const Matrix& A = value(a);
    if (begin > end || end > A.rows()) {
      throw ShapeError("slice_rows: range [" + std::to_string(begin) + "," + std::to_string(end) +
                       ") invalid for " + A.shape_string());
    }
    Matrix out(end - begin, A.cols());
    std::copy(A.row(begin), A.row(begin) + out.size(), out.data().begin());
    return unary(std::move(out), a, [a, begin](Tape& t, const Matrix& g) {
      Matrix& ga = t.grad_mut(a);
      for (std::size_t k = 0; k < g.size(); ++k) ga.data()[begin * ga.cols() + k] += g.data()[k];
    });
  }

  /// out[e] = a[index[e]].
  Var gather_rows(Var a, std::span<const std::size_t> index) {
    const Matrix& A = value(a);
    const std::size_t c = A.cols();
    Matrix out(index.size(), c);
    for (std::size_t e = 0; e < index.size(); ++e) {
      if (index[e] >= A.rows()) throw std::out_of_range("gather_rows: index out of range");
      std::copy(A.row(index[e]), A.row(index[e]) + c, out.row(e));
    }
    return unary(std::move(out), a, [a, index](Tape& t, const Matrix& g) {
      Matrix& ga = t.grad_mut(a);
      const std::size_t cols = ga.cols();
      for (std::size_t e = 0; e < index.size(); ++e) {
        double* dst = ga.row(index[e]);
        const double* src = g.row(e);
        for (std::size_t k = 0; k < cols; ++k) dst[k] += src[k];
      }
    });
  }

  /// out[k] = sum of rows e with segment[e] == k; empty segments are zero.
  /// Rows are added in ascending e, so the reduction order is fixed.
  Var segment_sum(Var a, std::span<const std::size_t> segment, std::size_t n_segments) {
    const Matrix& A = value(a);
    if (segment.size() != A.rows()) {
      throw ShapeError("segment_sum: expected " + std::to_string(A.rows()) + " segment ids, got " +
                       std::to_string(segment.size()));
    }
    const std::size_t c = A.cols();
    Matrix out(n_segments, c, 0.0);
    for (std::size_t e = 0; e < segment.size(); ++e) {
      if (segment[e] >= n_segments) throw std::out_of_range("segment_sum: segment id out of range");
      double* dst = out.row(segment[e]);
      const double* src = A.row(e);
      for (std::size_t k = 0; k < c; ++k) dst[k] += src[k];
    }
    return unary(std::move(out), a, [a, segment](Tape& t, const Matrix& g) {
      Matrix& ga = t.grad_mut(a);
      const std::size_t cols = ga.cols();
      for (std::size_t e = 0; e < segment.size(); ++e) {
        double* dst = ga.row(e);
        const double* src = g.row(segment[e]);
        for (std::size_t k = 0; k < cols; ++k) dst[k] += src[k];
      }
    });
  }

  /// Co-channel interference: out(i, m) = sum_{j != i} gains(i, j, m) * q(j, m)
  /// for q of shape D x M. The gain tensor must outlive the tape.
  Var channel_interference(Var q, const GainTensor& gains) {
    const Matrix& Q = value(q);
    const std::size_t d = gains.pairs();
    const std::size_t m = gains.channels();
    if (Q.rows() != d || Q.cols() != m) {
      throw ShapeError("channel_interference: expected " + std::to_string(d) + "x" + std::to_string(m) + ", got " +
                       Q.shape_string());
    }
    Matrix out(d, m, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        if (j == i) continue;
        for (std::size_t c = 0; c < m; ++c) out(i, c) += gains(i, j, c) * Q(j, c);
      }
    }
    const GainTensor* gp = &gains;
    return unary(std::move(out), q, [q, gp](Tape& t, const Matrix& g) {
      Matrix& gq = t.grad_mut(q);
      const std::size_t dd = gp->pairs();
      const std::size_t mm = gp->channels();
      for (std::size_t i = 0; i < dd; ++i) {
        for (std::size_t j = 0; j < dd; ++j) {
          if (j == i) continue;
          for (std::size_t c = 0; c < mm; ++c) gq(j, c) += (*gp)(i, j, c) * g(i, c);
        }
      }
    });
  }

  static void softmax_row(const double* in, double* out, std::size_t n) {
    const double mx = *std::max_element(in, in + n);
    double z = 0.0;
    for (std::size_t c = 0; c < n; ++c) z += (out[c] = std::exp(in[c] - mx));
    for (std::size_t c = 0; c < n; ++c) out[c] /= z;
  }

  static double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  }

 private:
  using Backprop = std::function<void(Tape&, const Matrix&)>;

  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    Backprop backprop;
  };

  Var push(Matrix value, bool requires_grad, Backprop fn) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    if (requires_grad) n.backprop = std::move(fn);
    nodes_.push_back(std::move(n));
    return Var{nodes_.size() - 1};
  }

  Var unary(Matrix out, Var a, Backprop fn) { return push(std::move(out), record_ && requires_grad(a), std::move(fn)); }

  Var unary_or_binary(Matrix out, Var a, Var b, Backprop fn) {
    return push(std::move(out), record_ && (requires_grad(a) || requires_grad(b)), std::move(fn));
  }

  Matrix& grad_mut(Var v) { return nodes_[v.id].grad; }

  static void require_same(const char* op, const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) {
      throw ShapeError(std::string(op) + ": expected equal shapes, got " + a.shape_string() + " and " +
                       b.shape_string());
    }
  }

  static void accumulate(Matrix& dst, const Matrix& src) {
    for (std::size_t k = 0; k < dst.size(); ++k) dst.data()[k] += src.data()[k];
  }

 public:
  /// out += op(A) * op(B).
  static void gemm(const Matrix& A, bool ta, const Matrix& B, bool tb, Matrix& out) {
    const std::size_t n = ta ? A.cols() : A.rows();
    const std::size_t k = ta ? A.rows() : A.cols();
    const std::size_t p = tb ? B.rows() : B.cols();
    for (std::size_t i = 0; i < n; ++i) {
      double* o = out.row(i);
      for (std::size_t l = 0; l < k; ++l) {
        const double a = ta ? A(l, i) : A(i, l);
        if (a == 0.0) continue;
        if (!tb) {
          const double* b = B.row(l);
          for (std::size_t j = 0; j < p; ++j) o[j] += a * b[j];
        } else {
          for (std::size_t j = 0; j < p; ++j) o[j] += a * B(j, l);
        }
      }
    }
  }

 private:
  bool record_;
  std::vector<Node> nodes_;
};

// ---- MLP --------------------------------------------------------------------

enum class Activation { kIdentity, kSoftmax, kSigmoid };

struct DenseLayer {
  Matrix weight;  // in x out
  Matrix bias;    // 1 x out
  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

/// Affine layers with ReLU between them and `output` after the last.
struct MlpParams {
  std::vector<DenseLayer> layers;
  Activation output = Activation::kIdentity;

  std::size_t in_dim() const { return layers.front().weight.rows(); }
  std::size_t out_dim() const { return layers.back().weight.cols(); }

  friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

/// Glorot-uniform weights and zero biases for the width chain `dims`.
inline MlpParams init_mlp(std::span<const std::size_t> dims, Activation output, Rng& rng) {
  if (dims.size() < 2) throw std::invalid_argument("init_mlp: need at least input and output widths");
  MlpParams p;
  p.output = output;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const double bound = std::sqrt(6.0 / static_cast<double>(dims[l] + dims[l + 1]));
    DenseLayer layer{Matrix(dims[l], dims[l + 1]), Matrix(1, dims[l + 1], 0.0)};
    for (double& w : layer.weight.data()) w = rng.uniform(-bound, bound);
    p.layers.push_back(std::move(layer));
  }
  return p;
}

/// Tape handles for the tensors of an MlpParams.
struct MlpVars {
  std::vector<std::pair<Var, Var>> layers;  // (weight, bias)
  Activation output = Activation::kIdentity;
};

inline MlpVars bind(Tape& tape, const MlpParams& p) {
  MlpVars v;
  v.output = p.output;
  for (const auto& l : p.layers) v.layers.emplace_back(tape.parameter(l.weight), tape.parameter(l.bias));
  return v;
}

inline Var apply_activation(Tape& tape, Var x, Activation act) {
  switch (act) {
    case Activation::kIdentity:
      return x;
    case Activation::kSoftmax:
      return tape.softmax_rows(x);
    case Activation::kSigmoid:
      return tape.sigmoid(x);
  }
  return x;
}

inline Var mlp_forward(Tape& tape, const MlpVars& mlp, Var input) {
  const std::size_t in = tape.value(mlp.layers.front().first).rows();
  if (tape.value(input).cols() != in) {
    throw ShapeError("mlp_forward: expected input width " + std::to_string(in) + ", got " +
                     std::to_string(tape.value(input).cols()));
  }
  Var h = input;
  for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
    h = tape.add_row(tape.matmul(h, mlp.layers[l].first), mlp.layers[l].second);
    if (l + 1 < mlp.layers.size()) h = tape.relu(h);
  }
  return apply_activation(tape, h, mlp.output);
}

/// Evaluation without a tape; same arithmetic as the tape overload.
inline Matrix mlp_forward(const MlpParams& params, const Matrix& input) {
  if (input.cols() != params.in_dim()) {
    throw ShapeError("mlp_forward: expected input width " + std::to_string(params.in_dim()) + ", got " +
                     std::to_string(input.cols()));
  }
  Matrix h = input;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const DenseLayer& layer = params.layers[l];
    Matrix out(h.rows(), layer.weight.cols(), 0.0);
    Tape::gemm(h, false, layer.weight, false, out);
    const bool hidden = l + 1 < params.layers.size();
    for (std::size_t r = 0; r < out.rows(); ++r) {
      double* o = out.row(r);
      for (std::size_t c = 0; c < out.cols(); ++c) {
        o[c] += layer.bias(0, c);
        if (hidden) o[c] = o[c] > 0.0 ? o[c] : 0.0;
      }
    }
    h = std::move(out);
  }
  if (params.output == Activation::kSoftmax) {
    Matrix y(h.rows(), h.cols());
    for (std::size_t r = 0; r < h.rows(); ++r) Tape::softmax_row(h.row(r), y.row(r), h.cols());
    return y;
  }
  if (params.output == Activation::kSigmoid) {
    for (double& x : h.data()) x = Tape::stable_sigmoid(x);
  }
  return h;
}

// ---- Adam -------------------------------------------------------------------

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::size_t step = 0;
};

/// One bias-corrected Adam update of a flat parameter vector.
inline void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
                      const AdamConfig& cfg) {
  if (params.size() != grads.size()) throw ShapeError("adam_step: params and grads differ in length");
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size()) throw ShapeError("adam_step: state does not match params");
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double g = grads[k];
    state.m[k] = cfg.beta1 * state.m[k] + (1.0 - cfg.beta1) * g;
    state.v[k] = cfg.beta2 * state.v[k] + (1.0 - cfg.beta2) * g * g;
    const double m_hat = state.m[k] / c1;
    const double v_hat = state.v[k] / c2;
    params[k] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
  }
}

}  // namespace jcpa::ad
