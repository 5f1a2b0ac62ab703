// Copyright 2026 The metaug Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Reverse-mode differentiation over dense 2-D tensors.
//
// Every node is evaluated eagerly when it is created and is immutable
// afterwards. Adjoints are built out of the same primitives as the forward
// pass, so a gradient obtained with `record = true` is itself an ordinary
// expression that can be differentiated again. That is what makes
// gradient-through-an-SGD-step (fast weights) work.
//
// Broadcasting is limited to scalar-with-array, row vector (1 x c) with
// (r x c), and column vector (r x 1) with (r x c).

#include <cstdint>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "metaug/tensor.hpp"

namespace metaug::diff {

/// Floor used inside log and inside L2-normalization denominators.
inline constexpr double kEpsilon = 1e-12;

enum class Op : std::uint8_t {
  Leaf,
  MatMul,
  Transpose,
  Add,
  Sub,
  Mul,
  Div,
  Affine,
  Exp,
  Log,
  Tanh,
  Sqrt,
  Square,
  ClampMin,
  Step,
  SumAll,
  SumRows,
  SumCols,
  Broadcast,
  MaxAll,
  MinAll,
  Gather,
  ScatterAdd,
};

std::string_view op_name(Op op);

/// Names of every primitive kernel plus the composite helpers built on them.
std::vector<std::string_view> primitive_kernels();

struct Node;
class Var;

namespace detail {
Var wrap(std::shared_ptr<const Node> node);
}  // namespace detail

/// Shared handle to an immutable graph node.
class Var {
 public:
  Var() = default;

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const;
  Shape shape() const { return value().shape(); }
  double item() const { return value().item(); }
  bool requires_grad() const;
  Op op() const;
  std::span<const Var> parents() const;
  const Node* node() const { return node_.get(); }

 private:
  explicit Var(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  friend Var detail::wrap(std::shared_ptr<const Node> node);

  std::shared_ptr<const Node> node_;
};

struct Node {
  Tensor value;
  Op op = Op::Leaf;
  std::vector<Var> parents;
  bool requires_grad = false;
  double scale = 1.0;  // Affine scale
  double shift = 0.0;  // Affine shift, ClampMin / Step threshold
  std::shared_ptr<const std::vector<std::size_t>> indices;  // Gather / ScatterAdd
  Tensor mask;  // MaxAll / MinAll selector
};

/// Trainable leaf (requires_grad = true).
Var parameter(Tensor value);
/// Constant leaf (requires_grad = false).
Var constant(Tensor value);
Var constant(double value);
/// A constant leaf holding the current value of `x`.
Var detach(const Var& x);

Var matmul(const Var& a, const Var& b);
Var transpose(const Var& x);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);

/// scale * x + shift, with constant coefficients.
Var affine(const Var& x, double scale, double shift);

Var exp(const Var& x);
/// Natural log of max(x, kEpsilon).
Var log(const Var& x);
Var tanh(const Var& x);
/// Square root of max(x, 0). The adjoint divides by max(sqrt(x), kEpsilon).
Var sqrt(const Var& x);
Var square(const Var& x);
/// max(x, threshold); the subgradient at exactly `threshold` is 0.
Var clamp_min(const Var& x, double threshold);
/// [x]+ = max(x, 0).
Var relu(const Var& x);
/// 1 where x > threshold, else 0. Piecewise constant, so it has no adjoint.
Var step(const Var& x, double threshold);

Var sum(const Var& x);
Var mean(const Var& x);
/// Column sums, shape (1 x c).
Var sum_rows(const Var& x);
/// Row sums, shape (r x 1).
Var sum_cols(const Var& x);
Var broadcast_to(const Var& x, Shape shape);
/// Largest / smallest entry (ties resolve to the first occurrence).
Var max(const Var& x);
Var min(const Var& x);

/// out.flat[k] = x.flat[indices[k]], reshaped to `shape`.
Var gather(const Var& x, std::vector<std::size_t> indices, Shape shape);
/// out.flat[indices[k]] += x.flat[k] on a zero tensor of `shape`.
Var scatter_add(const Var& x, std::vector<std::size_t> indices, Shape shape);

// Composite helpers (built from the primitives above).

/// Each row divided by max(||row||, kEpsilon).
Var l2_normalize_rows(const Var& x);
/// log(sum(exp(x))) over every entry, shifted by the (constant) maximum.
Var logsumexp(const Var& x);
/// Row-wise logsumexp, shape (r x 1).
Var logsumexp_rows(const Var& x);
/// log(1 + exp(x)) elementwise, evaluated without overflow.
Var softplus(const Var& x);
/// Concatenates 1 x k_i row vectors into one row vector.
Var concat_row_vectors(std::span<const Var> parts);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator/(const Var& a, const Var& b) { return div(a, b); }
inline Var operator-(const Var& x) { return affine(x, -1.0, 0.0); }
inline Var operator+(const Var& x, double c) { return affine(x, 1.0, c); }
inline Var operator+(double c, const Var& x) { return affine(x, 1.0, c); }
inline Var operator-(const Var& x, double c) { return affine(x, 1.0, -c); }
inline Var operator-(double c, const Var& x) { return affine(x, -1.0, c); }
inline Var operator*(const Var& x, double c) { return affine(x, c, 0.0); }
inline Var operator*(double c, const Var& x) { return affine(x, c, 0.0); }
inline Var operator/(const Var& x, double c) { return affine(x, 1.0 / c, 0.0); }

struct GradientRecord {
  Var target;
  std::vector<Var> with_respect_to;
  std::vector<Var> gradients;
  bool recorded = false;
};

/// Reverse-mode gradients of a scalar `target` with respect to `params`.
///
/// With `record` set the gradients stay attached to the graph and can be
/// differentiated again; otherwise they are detached constants. A parameter
/// that does not influence the target gets a zero gradient and a notice.
/// Throws std::invalid_argument if `target` is not 1 x 1.
GradientRecord backward(const Var& target, std::span<const Var> params, bool record);

/// param - lr * gradient as a graph expression.
Var sgd_expression(const Var& param, const Var& gradient, double lr);

}  // namespace metaug::diff
