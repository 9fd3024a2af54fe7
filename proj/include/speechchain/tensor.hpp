// speechchain/tensor.hpp
//
// Reverse-mode autodiff on dense n-d arrays. A dynamic graph is (re)built on
// every forward pass; backward() walks it once and accumulates gradients into
// every reachable tensor that requires them.

// Copyright 2026  speechchain authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SPEECHCHAIN_TENSOR_HPP
#define SPEECHCHAIN_TENSOR_HPP

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "speechchain/errors.hpp"

namespace speechchain {
namespace ad {

using Shape = std::vector<int64_t>;

inline int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << ")";
  return os.str();
}

struct TensorNode;

// Global switch: with gradients disabled, ops produce plain leaves and no
// graph is recorded (inference mode).
inline bool& grad_mode_flag() {
  thread_local bool enabled = true;
  return enabled;
}

struct NoGradGuard {
  NoGradGuard() : prev_(grad_mode_flag()) { grad_mode_flag() = false; }
  ~NoGradGuard() { grad_mode_flag() = prev_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

struct TensorNode {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  bool needs_grad = false;  // requires_grad or downstream of such a leaf
  bool consumed = false;    // set once backward has run through this node
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backward_fn;

  int64_t numel() const { return static_cast<int64_t>(values.size()); }

  void ensure_grad() {
    if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
  }

  // Long op chains would blow the stack under the default recursive
  // shared_ptr teardown; release parents iteratively instead.
  ~TensorNode() {
    std::vector<std::shared_ptr<TensorNode>> stack;
    stack.swap(parents);
    while (!stack.empty()) {
      std::shared_ptr<TensorNode> p = std::move(stack.back());
      stack.pop_back();
      if (p && p.use_count() == 1) {
        for (auto& gp : p->parents) stack.push_back(std::move(gp));
        p->parents.clear();
      }
    }
  }
};

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    return from_values(std::move(shape), {}, requires_grad, 0.0);
  }

  static Tensor full(Shape shape, double value, bool requires_grad = false) {
    return from_values(std::move(shape), {}, requires_grad, value);
  }

  static Tensor scalar(double value, bool requires_grad = false) {
    return from_vector({1}, {value}, requires_grad);
  }

  static Tensor from_vector(Shape shape, std::vector<double> values,
                            bool requires_grad = false) {
    if (shape_numel(shape) != static_cast<int64_t>(values.size()))
      throw ShapeError("tensor: " + std::to_string(values.size()) +
                       " values do not fill shape " + shape_str(shape));
    auto node = std::make_shared<TensorNode>();
    node->shape = std::move(shape);
    node->values = std::move(values);
    node->requires_grad = requires_grad;
    node->needs_grad = requires_grad;
    return Tensor(std::move(node));
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int64_t numel() const { return node_->numel(); }
  int64_t dim(size_t i) const { return node_->shape[i]; }
  size_t rank() const { return node_->shape.size(); }

  const std::vector<double>& values() const { return node_->values; }
  std::vector<double>& mutable_values() { return node_->values; }
  const std::vector<double>& grad() const { return node_->grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  void clear_grad() { node_->grad.clear(); }
  void accumulate_grad(const std::vector<double>& g) {
    node_->ensure_grad();
    for (size_t i = 0; i < g.size(); ++i) node_->grad[i] += g[i];
  }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool rg) {
    node_->requires_grad = rg;
    node_->needs_grad = rg || !node_->parents.empty();
  }
  bool is_leaf() const { return node_->parents.empty(); }

  double item() const {
    if (numel() != 1)
      throw ShapeError("item: tensor " + shape_str(shape()) + " is not scalar");
    return node_->values[0];
  }

  double at(int64_t i) const { return node_->values[static_cast<size_t>(i)]; }
  double at(int64_t r, int64_t c) const {
    return node_->values[static_cast<size_t>(r * node_->shape[1] + c)];
  }

  // New leaf sharing nothing with this graph.
  Tensor detach() const {
    return from_vector(node_->shape, node_->values, false);
  }

  // Leaf copy including requires_grad (used for per-utterance worker copies).
  Tensor deep_copy() const {
    return from_vector(node_->shape, node_->values, node_->requires_grad);
  }

  // Reverse pass from a scalar. `seed` is d(output)/d(this), normally 1;
  // loss coefficients enter here so weighted sums need no extra graph nodes.
  void backward(double seed = 1.0) const;

  TensorNode* node() const { return node_.get(); }
  const std::shared_ptr<TensorNode>& handle() const { return node_; }

  explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}

 private:
  static Tensor from_values(Shape shape, std::vector<double> values,
                            bool requires_grad, double fill) {
    auto node = std::make_shared<TensorNode>();
    node->values.assign(static_cast<size_t>(shape_numel(shape)), fill);
    node->shape = std::move(shape);
    node->requires_grad = requires_grad;
    node->needs_grad = requires_grad;
    return Tensor(std::move(node));
  }

  std::shared_ptr<TensorNode> node_;
};

namespace detail {

// Build an op result. Falls back to a plain leaf when gradients are globally
// disabled or no parent participates in differentiation.
inline Tensor make_op(Shape shape, std::vector<double> values,
                      std::vector<Tensor> parents,
                      std::function<void(TensorNode&)> backward_fn) {
  auto node = std::make_shared<TensorNode>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  bool track = grad_mode_flag();
  bool any_needs = false;
  if (track) {
    for (const auto& p : parents)
      if (p.node()->needs_grad) {
        any_needs = true;
        break;
      }
  }
  if (track && any_needs) {
    node->needs_grad = true;
    node->parents.reserve(parents.size());
    for (auto& p : parents) node->parents.push_back(p.handle());
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(node));
}

}  // namespace detail

inline void Tensor::backward(double seed) const {
  if (numel() != 1)
    throw NumericError("backward: loss must be scalar, got " +
                       shape_str(shape()));
  if (!std::isfinite(node_->values[0]))
    throw NumericError("backward: loss is not finite");

  // Iterative post-order DFS: leaves first, this node last.
  std::vector<TensorNode*> order;
  std::unordered_set<TensorNode*> seen;
  struct Frame {
    TensorNode* n;
    size_t next;
  };
  std::vector<Frame> stack;
  if (node_->needs_grad || node_->backward_fn) {
    stack.push_back({node_.get(), 0});
    seen.insert(node_.get());
  }
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.n->backward_fn && f.n->consumed)
      throw NumericError(
          "backward: graph already consumed by a previous backward pass");
    if (f.next < f.n->parents.size()) {
      TensorNode* p = f.n->parents[f.next++].get();
      if (p->needs_grad && !seen.count(p)) {
        seen.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(f.n);
      stack.pop_back();
    }
  }

  node_->ensure_grad();
  node_->grad[0] += seed;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorNode* n = *it;
    if (n->backward_fn) {
      n->ensure_grad();
      n->backward_fn(*n);
      n->consumed = true;
    }
  }
}

// ---------------------------------------------------------------------------
// Elementwise binary ops with the broadcasting the models need:
// equal shapes, scalar against anything, and row vector against a matrix.
// ---------------------------------------------------------------------------

namespace detail {

enum class Bcast { same, a_scalar, b_scalar, a_row, b_row };

inline bool row_compatible(const Shape& row, const Shape& mat) {
  if (mat.size() != 2) return false;
  int64_t cols = mat[1];
  if (row.size() == 1 && row[0] == cols) return true;
  if (row.size() == 2 && row[0] == 1 && row[1] == cols) return true;
  return false;
}

inline Bcast classify(const char* op, const Shape& a, const Shape& b) {
  if (a == b) return Bcast::same;
  if (shape_numel(b) == 1) return Bcast::b_scalar;
  if (shape_numel(a) == 1) return Bcast::a_scalar;
  if (row_compatible(b, a)) return Bcast::b_row;
  if (row_compatible(a, b)) return Bcast::a_row;
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a) +
                   " and " + shape_str(b));
}

// Accumulate d(out) into an operand's grad, reducing over broadcast axes.
inline void reduce_into(TensorNode& p, const std::vector<double>& contrib,
                        const Shape& out_shape, bool broadcast_scalar,
                        bool broadcast_row) {
  p.ensure_grad();
  if (broadcast_scalar) {
    double s = 0.0;
    for (double v : contrib) s += v;
    p.grad[0] += s;
  } else if (broadcast_row) {
    int64_t cols = out_shape[1];
    int64_t rows = out_shape[0];
    for (int64_t r = 0; r < rows; ++r)
      for (int64_t c = 0; c < cols; ++c)
        p.grad[static_cast<size_t>(c)] +=
            contrib[static_cast<size_t>(r * cols + c)];
  } else {
    for (size_t i = 0; i < contrib.size(); ++i) p.grad[i] += contrib[i];
  }
}

template <typename Fwd, typename GradA, typename GradB>
Tensor binary_op(const char* name, const Tensor& a, const Tensor& b, Fwd fwd,
                 GradA grad_a, GradB grad_b) {
  Bcast mode = classify(name, a.shape(), b.shape());
  const Shape& out_shape =
      (mode == Bcast::a_scalar || mode == Bcast::a_row) ? b.shape() : a.shape();
  int64_t n = shape_numel(out_shape);
  int64_t cols = out_shape.size() == 2 ? out_shape[1] : n;
  const auto& av = a.values();
  const auto& bv = b.values();
  std::vector<double> out(static_cast<size_t>(n));
  auto a_index = [mode, cols](int64_t i) -> int64_t {
    switch (mode) {
      case Bcast::a_scalar: return 0;
      case Bcast::a_row: return i % cols;
      default: return i;
    }
  };
  auto b_index = [mode, cols](int64_t i) -> int64_t {
    switch (mode) {
      case Bcast::b_scalar: return 0;
      case Bcast::b_row: return i % cols;
      default: return i;
    }
  };
  for (int64_t i = 0; i < n; ++i)
    out[static_cast<size_t>(i)] = fwd(av[static_cast<size_t>(a_index(i))],
                                      bv[static_cast<size_t>(b_index(i))]);

  auto backward = [mode, out_shape, n, grad_a, grad_b, a_index,
                   b_index](TensorNode& self) {
    TensorNode& pa = *self.parents[0];
    TensorNode& pb = *self.parents[1];
    if (pa.needs_grad) {
      std::vector<double> contrib(static_cast<size_t>(n));
      for (int64_t i = 0; i < n; ++i) {
        size_t ia = static_cast<size_t>(a_index(i));
        size_t ib = static_cast<size_t>(b_index(i));
        contrib[static_cast<size_t>(i)] =
            grad_a(self.grad[static_cast<size_t>(i)], pa.values[ia],
                   pb.values[ib], self.values[static_cast<size_t>(i)]);
      }
      reduce_into(pa, contrib, out_shape, mode == Bcast::a_scalar,
                  mode == Bcast::a_row);
    }
    if (pb.needs_grad) {
      std::vector<double> contrib(static_cast<size_t>(n));
      for (int64_t i = 0; i < n; ++i) {
        size_t ia = static_cast<size_t>(a_index(i));
        size_t ib = static_cast<size_t>(b_index(i));
        contrib[static_cast<size_t>(i)] =
            grad_b(self.grad[static_cast<size_t>(i)], pa.values[ia],
                   pb.values[ib], self.values[static_cast<size_t>(i)]);
      }
      reduce_into(pb, contrib, out_shape, mode == Bcast::b_scalar,
                  mode == Bcast::b_row);
    }
  };
  return make_op(out_shape, std::move(out), {a, b}, backward);
}

}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) {
  return detail::binary_op(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double g, double, double, double) { return g; },
      [](double g, double, double, double) { return g; });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  return detail::binary_op(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double g, double, double, double) { return g; },
      [](double g, double, double, double) { return -g; });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  return detail::binary_op(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double g, double, double y, double) { return g * y; },
      [](double g, double x, double, double) { return g * x; });
}

inline Tensor div(const Tensor& a, const Tensor& b) {
  return detail::binary_op(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double g, double, double y, double) { return g / y; },
      [](double g, double x, double y, double) { return -g * x / (y * y); });
}

// ---------------------------------------------------------------------------
// Unary elementwise ops.
// ---------------------------------------------------------------------------

namespace detail {

// grad_fn(g, x, y) where x is the input value and y the output value.
template <typename Fwd, typename Grad>
Tensor unary_op(const Tensor& a, Fwd fwd, Grad grad_fn) {
  const auto& av = a.values();
  std::vector<double> out(av.size());
  for (size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i]);
  auto backward = [grad_fn](TensorNode& self) {
    TensorNode& p = *self.parents[0];
    if (!p.needs_grad) return;
    p.ensure_grad();
    for (size_t i = 0; i < self.values.size(); ++i)
      p.grad[i] += grad_fn(self.grad[i], p.values[i], self.values[i]);
  };
  return make_op(a.shape(), std::move(out), {a}, backward);
}

}  // namespace detail

inline Tensor tanh(const Tensor& a) {
  return detail::unary_op(
      a, [](double x) { return std::tanh(x); },
      [](double g, double, double y) { return g * (1.0 - y * y); });
}

inline Tensor sigmoid(const Tensor& a) {
  return detail::unary_op(
      a,
      [](double x) {
        // Stable in both tails.
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double g, double, double y) { return g * y * (1.0 - y); });
}

inline Tensor leaky_relu(const Tensor& a, double slope) {
  return detail::unary_op(
      a, [slope](double x) { return x > 0.0 ? x : slope * x; },
      [slope](double g, double x, double) { return x > 0.0 ? g : slope * g; });
}

inline Tensor log(const Tensor& a) {
  return detail::unary_op(
      a, [](double x) { return std::log(x); },
      [](double g, double x, double) { return g / x; });
}

inline Tensor exp(const Tensor& a) {
  return detail::unary_op(
      a, [](double x) { return std::exp(x); },
      [](double g, double, double y) { return g * y; });
}

inline Tensor clamp(const Tensor& a, double lo, double hi) {
  return detail::unary_op(
      a, [lo, hi](double x) { return std::min(std::max(x, lo), hi); },
      [lo, hi](double g, double x, double) {
        return (x > lo && x < hi) ? g : 0.0;
      });
}

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }

inline Tensor scale(const Tensor& a, double s) {
  return detail::unary_op(
      a, [s](double x) { return s * x; },
      [s](double g, double, double) { return s * g; });
}

inline Tensor operator*(const Tensor& a, double s) { return scale(a, s); }
inline Tensor operator*(double s, const Tensor& a) { return scale(a, s); }

inline Tensor add_scalar(const Tensor& a, double s) {
  return detail::unary_op(
      a, [s](double x) { return x + s; },
      [](double g, double, double) { return g; });
}

// ---------------------------------------------------------------------------
// Matrix multiply (2-d x 2-d), Eigen-backed.
// ---------------------------------------------------------------------------

namespace detail {
using EMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<EMat>;
using CMatMap = Eigen::Map<const EMat>;
}  // namespace detail

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) +
                     " and " + shape_str(b.shape()));
  int64_t rows = a.dim(0), inner = a.dim(1), cols = b.dim(1);
  std::vector<double> out(static_cast<size_t>(rows * cols));
  detail::MatMap(out.data(), rows, cols).noalias() =
      detail::CMatMap(a.values().data(), rows, inner) *
      detail::CMatMap(b.values().data(), inner, cols);
  auto backward = [rows, inner, cols](TensorNode& self) {
    TensorNode& pa = *self.parents[0];
    TensorNode& pb = *self.parents[1];
    detail::CMatMap g(self.grad.data(), rows, cols);
    if (pa.needs_grad) {
      pa.ensure_grad();
      detail::MatMap(pa.grad.data(), rows, inner).noalias() +=
          g * detail::CMatMap(pb.values.data(), inner, cols).transpose();
    }
    if (pb.needs_grad) {
      pb.ensure_grad();
      detail::MatMap(pb.grad.data(), inner, cols).noalias() +=
          detail::CMatMap(pa.values.data(), rows, inner).transpose() * g;
    }
  };
  return detail::make_op({rows, cols}, std::move(out), {a, b}, backward);
}

// ---------------------------------------------------------------------------
// Softmax / log-softmax along an axis of a 1-d or 2-d tensor.
// ---------------------------------------------------------------------------

namespace detail {

// Resolve (rows, cols, row_stride, col_stride) so that reduction runs along
// `axis`. For 1-d input there is a single implicit row.
struct AxisView {
  int64_t groups;       // number of independent reductions
  int64_t len;          // elements per reduction
  int64_t group_stride; // stride between groups
  int64_t elem_stride;  // stride within a group
};

inline AxisView axis_view(const char* op, const Shape& s, int axis) {
  if (s.size() == 1) {
    if (axis != 0 && axis != -1)
      throw ShapeError(std::string(op) + ": bad axis for 1-d tensor");
    return {1, s[0], s[0], 1};
  }
  if (s.size() != 2)
    throw ShapeError(std::string(op) + ": expects 1-d or 2-d tensor, got " +
                     shape_str(s));
  if (axis == -1) axis = 1;
  if (axis == 1) return {s[0], s[1], s[1], 1};
  if (axis == 0) return {s[1], s[0], 1, s[1]};
  throw ShapeError(std::string(op) + ": bad axis");
}

}  // namespace detail

inline Tensor softmax(const Tensor& a, int axis = -1) {
  auto view = detail::axis_view("softmax", a.shape(), axis);
  const auto& av = a.values();
  std::vector<double> out(av.size());
  for (int64_t g = 0; g < view.groups; ++g) {
    int64_t base = g * view.group_stride;
    double m = -std::numeric_limits<double>::infinity();
    for (int64_t i = 0; i < view.len; ++i)
      m = std::max(m, av[static_cast<size_t>(base + i * view.elem_stride)]);
    double s = 0.0;
    for (int64_t i = 0; i < view.len; ++i) {
      size_t idx = static_cast<size_t>(base + i * view.elem_stride);
      out[idx] = std::exp(av[idx] - m);
      s += out[idx];
    }
    for (int64_t i = 0; i < view.len; ++i)
      out[static_cast<size_t>(base + i * view.elem_stride)] /= s;
  }
  auto backward = [view](TensorNode& self) {
    TensorNode& p = *self.parents[0];
    if (!p.needs_grad) return;
    p.ensure_grad();
    for (int64_t g = 0; g < view.groups; ++g) {
      int64_t base = g * view.group_stride;
      double dot = 0.0;
      for (int64_t i = 0; i < view.len; ++i) {
        size_t idx = static_cast<size_t>(base + i * view.elem_stride);
        dot += self.grad[idx] * self.values[idx];
      }
      for (int64_t i = 0; i < view.len; ++i) {
        size_t idx = static_cast<size_t>(base + i * view.elem_stride);
        p.grad[idx] += self.values[idx] * (self.grad[idx] - dot);
      }
    }
  };
  return detail::make_op(a.shape(), std::move(out), {a}, backward);
}

inline Tensor log_softmax(const Tensor& a, int axis = -1) {
  auto view = detail::axis_view("log_softmax", a.shape(), axis);
  const auto& av = a.values();
  std::vector<double> out(av.size());
  for (int64_t g = 0; g < view.groups; ++g) {
    int64_t base = g * view.group_stride;
    double m = -std::numeric_limits<double>::infinity();
    for (int64_t i = 0; i < view.len; ++i)
      m = std::max(m, av[static_cast<size_t>(base + i * view.elem_stride)]);
    double s = 0.0;
    for (int64_t i = 0; i < view.len; ++i)
      s += std::exp(av[static_cast<size_t>(base + i * view.elem_stride)] - m);
    double lse = m + std::log(s);
    for (int64_t i = 0; i < view.len; ++i) {
      size_t idx = static_cast<size_t>(base + i * view.elem_stride);
      out[idx] = av[idx] - lse;
    }
  }
  auto backward = [view](TensorNode& self) {
    TensorNode& p = *self.parents[0];
    if (!p.needs_grad) return;
    p.ensure_grad();
    for (int64_t g = 0; g < view.groups; ++g) {
      int64_t base = g * view.group_stride;
      double gsum = 0.0;
      for (int64_t i = 0; i < view.len; ++i)
        gsum += self.grad[static_cast<size_t>(base + i * view.elem_stride)];
      for (int64_t i = 0; i < view.len; ++i) {
        size_t idx = static_cast<size_t>(base + i * view.elem_stride);
        p.grad[idx] += self.grad[idx] - std::exp(self.values[idx]) * gsum;
      }
    }
  };
  return detail::make_op(a.shape(), std::move(out), {a}, backward);
}

// ---------------------------------------------------------------------------
// Shape ops: reshape, concat, slice, row gather.
// ---------------------------------------------------------------------------

inline Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel())
    throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " +
                     shape_str(shape));
  std::vector<double> out = a.values();
  auto backward = [](TensorNode& self) {
    TensorNode& p = *self.parents[0];
    if (!p.needs_grad) return;
    p.ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
  };
  return detail::make_op(std::move(shape), std::move(out), {a}, backward);
}

inline Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  size_t rank = parts[0].rank();
  if (axis < 0) axis += static_cast<int>(rank);
  if (axis < 0 || static_cast<size_t>(axis) >= rank)
    throw ShapeError("concat: bad axis");
  Shape out_shape = parts[0].shape();
  int64_t axis_total = 0;
  for (const auto& p : parts) {
    if (p.rank() != rank)
      throw ShapeError("concat: rank mismatch between inputs");
    for (size_t d = 0; d < rank; ++d)
      if (static_cast<int>(d) != axis && p.shape()[d] != out_shape[d])
        throw ShapeError("concat: shape mismatch " + shape_str(p.shape()) +
                         " vs " + shape_str(out_shape) + " on axis " +
                         std::to_string(d));
    axis_total += p.shape()[static_cast<size_t>(axis)];
  }
  out_shape[static_cast<size_t>(axis)] = axis_total;

  // Treat the tensor as (outer, axis, inner) and copy contiguous blocks.
  int64_t outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= out_shape[static_cast<size_t>(d)];
  for (size_t d = static_cast<size_t>(axis) + 1; d < rank; ++d)
    inner *= out_shape[d];

  std::vector<double> out(static_cast<size_t>(shape_numel(out_shape)));
  std::vector<int64_t> part_axis(parts.size());
  for (size_t pi = 0; pi < parts.size(); ++pi)
    part_axis[pi] = parts[pi].shape()[static_cast<size_t>(axis)];

  int64_t out_row = axis_total * inner;
  int64_t offset = 0;
  for (size_t pi = 0; pi < parts.size(); ++pi) {
    const auto& pv = parts[pi].values();
    int64_t block = part_axis[pi] * inner;
    for (int64_t o = 0; o < outer; ++o)
      std::copy(pv.begin() + o * block, pv.begin() + (o + 1) * block,
                out.begin() + o * out_row + offset);
    offset += block;
  }

  auto backward = [outer, inner, out_row, part_axis](TensorNode& self) {
    int64_t offset = 0;
    for (size_t pi = 0; pi < self.parents.size(); ++pi) {
      TensorNode& p = *self.parents[pi];
      int64_t block = part_axis[pi] * inner;
      if (p.needs_grad) {
        p.ensure_grad();
        for (int64_t o = 0; o < outer; ++o) {
          const double* src = self.grad.data() + o * out_row + offset;
          double* dst = p.grad.data() + o * block;
          for (int64_t i = 0; i < block; ++i) dst[i] += src[i];
        }
      }
      offset += block;
    }
  };
  return detail::make_op(std::move(out_shape), std::move(out), parts,
                         backward);
}

inline Tensor slice(const Tensor& a, int axis, int64_t start, int64_t len) {
  size_t rank = a.rank();
  if (axis < 0) axis += static_cast<int>(rank);
  if (axis < 0 || static_cast<size_t>(axis) >= rank)
    throw ShapeError("slice: bad axis");
  int64_t extent = a.shape()[static_cast<size_t>(axis)];
  if (start < 0 || len < 0 || start + len > extent)
    throw ShapeError("slice: range [" + std::to_string(start) + ", " +
                     std::to_string(start + len) + ") outside extent " +
                     std::to_string(extent));
  Shape out_shape = a.shape();
  out_shape[static_cast<size_t>(axis)] = len;
  int64_t outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= a.shape()[static_cast<size_t>(d)];
  for (size_t d = static_cast<size_t>(axis) + 1; d < rank; ++d)
    inner *= a.shape()[d];
  int64_t in_row = extent * inner;
  int64_t out_row = len * inner;
  std::vector<double> out(static_cast<size_t>(shape_numel(out_shape)));
  const auto& av = a.values();
  for (int64_t o = 0; o < outer; ++o)
    std::copy(av.begin() + o * in_row + start * inner,
              av.begin() + o * in_row + (start + len) * inner,
              out.begin() + o * out_row);
  auto backward = [outer, inner, in_row, out_row, start](TensorNode& self) {
    TensorNode& p = *self.parents[0];
    if (!p.needs_grad) return;
    p.ensure_grad();
    for (int64_t o = 0; o < outer; ++o) {
      const double* src = self.grad.data() + o * out_row;
      double* dst = p.grad.data() + o * in_row + start * inner;
      for (int64_t i = 0; i < out_row; ++i) dst[i] += src[i];
    }
  };
  return detail::make_op(std::move(out_shape), std::move(out), {a}, backward);
}

// Gather whole rows of a 2-d tensor; also serves as embedding lookup.
inline Tensor gather_rows(const Tensor& a, std::vector<int64_t> rows) {
  if (a.rank() != 2) throw ShapeError("gather_rows: expects 2-d tensor");
  int64_t n_rows = a.dim(0), cols = a.dim(1);
  for (int64_t r : rows)
    if (r < 0 || r >= n_rows)
      throw ShapeError("gather_rows: index " + std::to_string(r) +
                       " outside " + std::to_string(n_rows) + " rows");
  std::vector<double> out(rows.size() * static_cast<size_t>(cols));
  const auto& av = a.values();
  for (size_t i = 0; i < rows.size(); ++i)
    std::copy(av.begin() + rows[i] * cols, av.begin() + (rows[i] + 1) * cols,
              out.begin() + static_cast<int64_t>(i) * cols);
  auto backward = [rows, cols](TensorNode& self) {
    TensorNode& p = *self.parents[0];
    if (!p.needs_grad) return;
    p.ensure_grad();
    for (size_t i = 0; i < rows.size(); ++i) {
      const double* src = self.grad.data() + static_cast<int64_t>(i) * cols;
      double* dst = p.grad.data() + rows[i] * cols;
      for (int64_t c = 0; c < cols; ++c) dst[c] += src[c];
    }
  };
  return detail::make_op({static_cast<int64_t>(rows.size()), cols},
                         std::move(out), {a}, backward);
}

inline Tensor embedding_lookup(const Tensor& table,
                               const std::vector<int64_t>& ids) {
  return gather_rows(table, ids);
}

// ---------------------------------------------------------------------------
// 1-d convolution over time (same padding) and width-2 stride-1 max pooling.
// Input is (S, C_in); the kernel is stored as (K, C_in, C_out).
// ---------------------------------------------------------------------------

inline Tensor conv1d_same(const Tensor& x, const Tensor& kernel) {
  if (x.rank() != 2 || kernel.rank() != 3 || kernel.dim(1) != x.dim(1))
    throw ShapeError("conv1d: incompatible shapes " + shape_str(x.shape()) +
                     " and " + shape_str(kernel.shape()));
  int64_t s_len = x.dim(0), c_in = x.dim(1);
  int64_t k = kernel.dim(0), c_out = kernel.dim(2);
  int64_t left = (k - 1) / 2;
  std::vector<double> out(static_cast<size_t>(s_len * c_out), 0.0);
  detail::MatMap out_m(out.data(), s_len, c_out);
  detail::CMatMap x_m(x.values().data(), s_len, c_in);
  for (int64_t tap = 0; tap < k; ++tap) {
    // out[s] += x[s + tap - left] * W[tap]
    int64_t lo = std::max<int64_t>(0, left - tap);
    int64_t hi = std::min<int64_t>(s_len, s_len + left - tap);
    if (lo >= hi) continue;
    detail::CMatMap w_tap(kernel.values().data() + tap * c_in * c_out, c_in,
                          c_out);
    out_m.middleRows(lo, hi - lo).noalias() +=
        x_m.middleRows(lo + tap - left, hi - lo) * w_tap;
  }
  auto backward = [s_len, c_in, k, c_out, left](TensorNode& self) {
    TensorNode& px = *self.parents[0];
    TensorNode& pw = *self.parents[1];
    detail::CMatMap g(self.grad.data(), s_len, c_out);
    detail::CMatMap x_m(px.values.data(), s_len, c_in);
    if (px.needs_grad) px.ensure_grad();
    if (pw.needs_grad) pw.ensure_grad();
    for (int64_t tap = 0; tap < k; ++tap) {
      int64_t lo = std::max<int64_t>(0, left - tap);
      int64_t hi = std::min<int64_t>(s_len, s_len + left - tap);
      if (lo >= hi) continue;
      if (px.needs_grad) {
        detail::CMatMap w_tap(pw.values.data() + tap * c_in * c_out, c_in,
                              c_out);
        detail::MatMap(px.grad.data(), s_len, c_in)
            .middleRows(lo + tap - left, hi - lo)
            .noalias() += g.middleRows(lo, hi - lo) * w_tap.transpose();
      }
      if (pw.needs_grad) {
        detail::MatMap gw(pw.grad.data() + tap * c_in * c_out, c_in, c_out);
        gw.noalias() += x_m.middleRows(lo + tap - left, hi - lo).transpose() *
                        g.middleRows(lo, hi - lo);
      }
    }
  };
  return detail::make_op({s_len, c_out}, std::move(out), {x, kernel},
                         backward);
}

inline Tensor max_pool1d_same(const Tensor& x) {
  if (x.rank() != 2) throw ShapeError("max_pool1d: expects 2-d tensor");
  int64_t s_len = x.dim(0), cols = x.dim(1);
  const auto& xv = x.values();
  std::vector<double> out(xv.size());
  // argmax offsets (0 or 1); ties prefer the earlier frame
  std::vector<uint8_t> arg(xv.size(), 0);
  for (int64_t s = 0; s < s_len; ++s)
    for (int64_t c = 0; c < cols; ++c) {
      size_t i = static_cast<size_t>(s * cols + c);
      double v = xv[i];
      if (s + 1 < s_len && xv[i + static_cast<size_t>(cols)] > v) {
        v = xv[i + static_cast<size_t>(cols)];
        arg[i] = 1;
      }
      out[i] = v;
    }
  auto backward = [cols, arg](TensorNode& self) {
    TensorNode& p = *self.parents[0];
    if (!p.needs_grad) return;
    p.ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i)
      p.grad[i + static_cast<size_t>(arg[i] ? cols : 0)] += self.grad[i];
  };
  return detail::make_op(x.shape(), std::move(out), {x}, backward);
}

// ---------------------------------------------------------------------------
// Reductions to a scalar. Accumulation is 64-bit throughout.
// ---------------------------------------------------------------------------

inline Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  auto backward = [](TensorNode& self) {
    TensorNode& p = *self.parents[0];
    if (!p.needs_grad) return;
    p.ensure_grad();
    double g = self.grad[0];
    for (auto& pg : p.grad) pg += g;
  };
  return detail::make_op({1}, {s}, {a}, backward);
}

inline Tensor mean(const Tensor& a) {
  if (a.numel() == 0) throw ShapeError("mean: empty tensor");
  double s = 0.0;
  for (double v : a.values()) s += v;
  double n = static_cast<double>(a.numel());
  auto backward = [n](TensorNode& self) {
    TensorNode& p = *self.parents[0];
    if (!p.needs_grad) return;
    p.ensure_grad();
    double g = self.grad[0] / n;
    for (auto& pg : p.grad) pg += g;
  };
  return detail::make_op({1}, {s / n}, {a}, backward);
}

// ---------------------------------------------------------------------------
// Gradient checking against central finite differences.
// ---------------------------------------------------------------------------

struct GradCheckReport {
  double max_rel_err = 0.0;
  size_t worst_index = 0;
  bool passed = false;
  std::vector<double> analytic;
  std::vector<double> numeric;
};

inline GradCheckReport gradient_check(
    const std::function<Tensor(const Tensor&)>& f, const Tensor& point,
    double tolerance, double step = 1e-5) {
  Tensor x = Tensor::from_vector(point.shape(), point.values(), true);
  Tensor y = f(x);
  if (y.numel() != 1)
    throw NumericError("gradient_check: function must be scalar-valued");
  if (!std::isfinite(y.item()))
    throw NumericError("gradient_check: function value is not finite");
  y.backward();

  GradCheckReport report;
  report.analytic = x.has_grad()
                        ? x.grad()
                        : std::vector<double>(point.values().size(), 0.0);
  report.numeric.resize(point.values().size());

  NoGradGuard no_grad;
  for (size_t i = 0; i < point.values().size(); ++i) {
    std::vector<double> vp = point.values();
    vp[i] += step;
    double f_plus = f(Tensor::from_vector(point.shape(), vp, false)).item();
    vp[i] -= 2.0 * step;
    double f_minus = f(Tensor::from_vector(point.shape(), vp, false)).item();
    if (!std::isfinite(f_plus) || !std::isfinite(f_minus))
      throw NumericError("gradient_check: non-finite value near point");
    report.numeric[i] = (f_plus - f_minus) / (2.0 * step);
  }

  for (size_t i = 0; i < report.numeric.size(); ++i) {
    double ga = report.analytic[i], gn = report.numeric[i];
    double denom = std::max({1e-3, std::fabs(ga), std::fabs(gn)});
    double rel = std::fabs(ga - gn) / denom;
    if (rel > report.max_rel_err) {
      report.max_rel_err = rel;
      report.worst_index = i;
    }
  }
  report.passed = report.max_rel_err <= tolerance;
  return report;
}

}  // namespace ad
}  // namespace speechchain

#endif  // SPEECHCHAIN_TENSOR_HPP
