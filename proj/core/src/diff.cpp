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

#include "metaug/diff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "metaug/log.hpp"

namespace metaug::diff {

namespace detail {
Var wrap(std::shared_ptr<const Node> node) { return Var(std::move(node)); }
}  // namespace detail

namespace {

using IndexList = std::shared_ptr<const std::vector<std::size_t>>;

Var make(Op op, Tensor value, std::vector<Var> parents, double scale = 1.0, double shift = 0.0,
         IndexList indices = nullptr, Tensor mask = {}) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->op = op;
  node->requires_grad =
      std::any_of(parents.begin(), parents.end(), [](const Var& p) { return p.requires_grad(); });
  node->parents = std::move(parents);
  node->scale = scale;
  node->shift = shift;
  node->indices = std::move(indices);
  node->mask = std::move(mask);
  return detail::wrap(std::move(node));
}

void require_defined(const Var& x, const char* op) {
  if (!x.defined()) throw std::invalid_argument(std::string(op) + ": undefined operand");
}

template <typename F>
Tensor map_values(const Tensor& x, F f) {
  Tensor out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  return out;
}

template <typename F>
Tensor zip_values(const Tensor& a, const Tensor& b, F f) {
  Tensor out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i], b[i]);
  return out;
}

bool broadcastable(Shape from, Shape to) {
  if (from == to) return true;
  if (from.is_scalar()) return true;
  if (from.rows == 1 && from.cols == to.cols) return true;
  if (from.cols == 1 && from.rows == to.rows) return true;
  return false;
}

std::pair<Var, Var> align(const Var& a, const Var& b, const char* op) {
  require_defined(a, op);
  require_defined(b, op);
  const Shape sa = a.shape(), sb = b.shape();
  if (sa == sb) return {a, b};
  if (broadcastable(sa, sb) && !broadcastable(sb, sa)) return {broadcast_to(a, sb), b};
  if (broadcastable(sb, sa) && !broadcastable(sa, sb)) return {a, broadcast_to(b, sa)};
  if (sa.is_scalar()) return {broadcast_to(a, sb), b};
  if (sb.is_scalar()) return {a, broadcast_to(b, sa)};
  throw ShapeError(std::string(op) + ": incompatible shapes " + to_string(sa) + " and " +
                   to_string(sb));
}

/// Sums `g` back down to `shape` (adjoint of broadcast_to).
Var reduce_to(const Var& g, Shape shape) {
  if (g.shape() == shape) return g;
  if (shape.is_scalar()) return sum(g);
  if (shape.rows == 1) return sum_rows(g);
  return sum_cols(g);
}

Tensor onehot_extreme(const Tensor& x, bool largest, double& best) {
  if (x.empty()) throw ShapeError("max/min of an empty tensor");
  std::size_t arg = 0;
  for (std::size_t i = 1; i < x.size(); ++i) {
    if (largest ? x[i] > x[arg] : x[i] < x[arg]) arg = i;
  }
  best = x[arg];
  Tensor mask(x.rows(), x.cols());
  mask[arg] = 1.0;
  return mask;
}

// Contribution of `g` (adjoint of `out`) to parent `which`. May be undefined
// when the parent receives no gradient through this op.
Var parent_adjoint(const Var& out, const Var& g, std::size_t which) {
  const Node& n = *out.node();
  const auto& p = n.parents;
  switch (n.op) {
    case Op::Leaf:
    case Op::Step:
      return {};
    case Op::MatMul:
      return which == 0 ? matmul(g, transpose(p[1])) : matmul(transpose(p[0]), g);
    case Op::Transpose:
      return transpose(g);
    case Op::Add:
      return g;
    case Op::Sub:
      return which == 0 ? g : -g;
    case Op::Mul:
      return which == 0 ? g * p[1] : g * p[0];
    case Op::Div:
      return which == 0 ? g / p[1] : -((g * out) / p[1]);
    case Op::Affine:
      return affine(g, n.scale, 0.0);
    case Op::Exp:
      return g * out;
    case Op::Log:
      return (g * step(p[0], kEpsilon)) / clamp_min(p[0], kEpsilon);
    case Op::Tanh:
      return g - g * square(out);
    case Op::Sqrt:
      return affine(g, 0.5, 0.0) / clamp_min(out, kEpsilon);
    case Op::Square:
      return affine(g * p[0], 2.0, 0.0);
    case Op::ClampMin:
      return g * step(p[0], n.shift);
    case Op::SumAll:
    case Op::SumRows:
    case Op::SumCols:
      return broadcast_to(g, p[0].shape());
    case Op::Broadcast:
      return reduce_to(g, p[0].shape());
    case Op::MaxAll:
    case Op::MinAll:
      return broadcast_to(g, p[0].shape()) * constant(n.mask);
    case Op::Gather:
      return scatter_add(g, *n.indices, p[0].shape());
    case Op::ScatterAdd:
      return gather(g, *n.indices, p[0].shape());
  }
  return {};
}

}  // namespace

std::string_view op_name(Op op) {
  switch (op) {
    case Op::Leaf: return "leaf";
    case Op::MatMul: return "matmul";
    case Op::Transpose: return "transpose";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Div: return "div";
    case Op::Affine: return "affine";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::Tanh: return "tanh";
    case Op::Sqrt: return "sqrt";
    case Op::Square: return "square";
    case Op::ClampMin: return "clamp_min";
    case Op::Step: return "step";
    case Op::SumAll: return "sum";
    case Op::SumRows: return "sum_rows";
    case Op::SumCols: return "sum_cols";
    case Op::Broadcast: return "broadcast";
    case Op::MaxAll: return "max";
    case Op::MinAll: return "min";
    case Op::Gather: return "gather";
    case Op::ScatterAdd: return "scatter_add";
  }
  return "unknown";
}

std::vector<std::string_view> primitive_kernels() {
  std::vector<std::string_view> names;
  for (int i = static_cast<int>(Op::MatMul); i <= static_cast<int>(Op::ScatterAdd); ++i) {
    names.push_back(op_name(static_cast<Op>(i)));
  }
  for (std::string_view composite :
       {"relu", "mean", "l2_normalize_rows", "logsumexp", "logsumexp_rows", "softplus"}) {
    names.push_back(composite);
  }
  return names;
}

const Tensor& Var::value() const {
  if (!node_) throw std::logic_error("value() on an undefined Var");
  return node_->value;
}

bool Var::requires_grad() const { return node_ && node_->requires_grad; }
Op Var::op() const { return node_ ? node_->op : Op::Leaf; }

std::span<const Var> Var::parents() const {
  if (!node_) return {};
  return node_->parents;
}

Var parameter(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  return detail::wrap(std::move(node));
}

Var constant(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return detail::wrap(std::move(node));
}

Var constant(double value) { return constant(Tensor::scalar(value)); }

Var detach(const Var& x) {
  require_defined(x, "detach");
  return constant(x.value());
}

Var matmul(const Var& a, const Var& b) {
  require_defined(a, "matmul");
  require_defined(b, "matmul");
  return make(Op::MatMul, metaug::matmul(a.value(), b.value()), {a, b});
}

Var transpose(const Var& x) {
  require_defined(x, "transpose");
  return make(Op::Transpose, x.value().transposed(), {x});
}

Var add(const Var& a, const Var& b) {
  auto [x, y] = align(a, b, "add");
  return make(Op::Add, zip_values(x.value(), y.value(), std::plus<>()), {x, y});
}

Var sub(const Var& a, const Var& b) {
  auto [x, y] = align(a, b, "sub");
  return make(Op::Sub, zip_values(x.value(), y.value(), std::minus<>()), {x, y});
}

Var mul(const Var& a, const Var& b) {
  auto [x, y] = align(a, b, "mul");
  return make(Op::Mul, zip_values(x.value(), y.value(), std::multiplies<>()), {x, y});
}

Var div(const Var& a, const Var& b) {
  auto [x, y] = align(a, b, "div");
  return make(Op::Div, zip_values(x.value(), y.value(), std::divides<>()), {x, y});
}

Var affine(const Var& x, double scale, double shift) {
  require_defined(x, "affine");
  return make(Op::Affine, map_values(x.value(), [=](double v) { return scale * v + shift; }),
              {x}, scale, shift);
}

Var exp(const Var& x) {
  require_defined(x, "exp");
  return make(Op::Exp, map_values(x.value(), [](double v) { return std::exp(v); }), {x});
}

Var log(const Var& x) {
  require_defined(x, "log");
  return make(Op::Log,
              map_values(x.value(), [](double v) { return std::log(std::max(v, kEpsilon)); }),
              {x});
}

Var tanh(const Var& x) {
  require_defined(x, "tanh");
  return make(Op::Tanh, map_values(x.value(), [](double v) { return std::tanh(v); }), {x});
}

Var sqrt(const Var& x) {
  require_defined(x, "sqrt");
  return make(Op::Sqrt,
              map_values(x.value(), [](double v) { return std::sqrt(std::max(v, 0.0)); }), {x});
}

Var square(const Var& x) {
  require_defined(x, "square");
  return make(Op::Square, map_values(x.value(), [](double v) { return v * v; }), {x});
}

Var clamp_min(const Var& x, double threshold) {
  require_defined(x, "clamp_min");
  return make(Op::ClampMin,
              map_values(x.value(), [=](double v) { return std::max(v, threshold); }), {x}, 1.0,
              threshold);
}

Var relu(const Var& x) { return clamp_min(x, 0.0); }

Var step(const Var& x, double threshold) {
  require_defined(x, "step");
  auto node = std::make_shared<Node>();
  node->value = map_values(x.value(), [=](double v) { return v > threshold ? 1.0 : 0.0; });
  node->op = Op::Step;
  node->parents = {x};
  node->shift = threshold;
  return detail::wrap(std::move(node));
}

Var sum(const Var& x) {
  require_defined(x, "sum");
  const auto v = x.value().values();
  return make(Op::SumAll, Tensor::scalar(std::accumulate(v.begin(), v.end(), 0.0)), {x});
}

Var mean(const Var& x) {
  require_defined(x, "mean");
  if (x.value().empty()) throw ShapeError("mean of an empty tensor");
  return affine(sum(x), 1.0 / static_cast<double>(x.value().size()), 0.0);
}

Var sum_rows(const Var& x) {
  require_defined(x, "sum_rows");
  const Tensor& v = x.value();
  Tensor out(1, v.cols());
  for (std::size_t r = 0; r < v.rows(); ++r)
    for (std::size_t c = 0; c < v.cols(); ++c) out[c] += v(r, c);
  return make(Op::SumRows, std::move(out), {x});
}

Var sum_cols(const Var& x) {
  require_defined(x, "sum_cols");
  const Tensor& v = x.value();
  Tensor out(v.rows(), 1);
  for (std::size_t r = 0; r < v.rows(); ++r)
    for (std::size_t c = 0; c < v.cols(); ++c) out[r] += v(r, c);
  return make(Op::SumCols, std::move(out), {x});
}

Var broadcast_to(const Var& x, Shape shape) {
  require_defined(x, "broadcast_to");
  const Shape from = x.shape();
  if (from == shape) return x;
  if (!broadcastable(from, shape)) {
    throw ShapeError("broadcast_to: cannot broadcast " + to_string(from) + " to " +
                     to_string(shape));
  }
  const Tensor& v = x.value();
  Tensor out(shape.rows, shape.cols);
  for (std::size_t r = 0; r < shape.rows; ++r)
    for (std::size_t c = 0; c < shape.cols; ++c)
      out(r, c) = v(from.rows == 1 ? 0 : r, from.cols == 1 ? 0 : c);
  return make(Op::Broadcast, std::move(out), {x});
}

Var max(const Var& x) {
  require_defined(x, "max");
  double best = 0.0;
  Tensor mask = onehot_extreme(x.value(), true, best);
  return make(Op::MaxAll, Tensor::scalar(best), {x}, 1.0, 0.0, nullptr, std::move(mask));
}

Var min(const Var& x) {
  require_defined(x, "min");
  double best = 0.0;
  Tensor mask = onehot_extreme(x.value(), false, best);
  return make(Op::MinAll, Tensor::scalar(best), {x}, 1.0, 0.0, nullptr, std::move(mask));
}

Var gather(const Var& x, std::vector<std::size_t> indices, Shape shape) {
  require_defined(x, "gather");
  if (indices.size() != shape.size()) {
    throw ShapeError("gather: " + std::to_string(indices.size()) + " indices for shape " +
                     to_string(shape));
  }
  const Tensor& v = x.value();
  Tensor out(shape.rows, shape.cols);
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= v.size()) throw std::out_of_range("gather: index out of range");
    out[k] = v[indices[k]];
  }
  return make(Op::Gather, std::move(out), {x}, 1.0, 0.0,
              std::make_shared<const std::vector<std::size_t>>(std::move(indices)));
}

Var scatter_add(const Var& x, std::vector<std::size_t> indices, Shape shape) {
  require_defined(x, "scatter_add");
  const Tensor& v = x.value();
  if (indices.size() != v.size()) {
    throw ShapeError("scatter_add: " + std::to_string(indices.size()) + " indices for input " +
                     to_string(v.shape()));
  }
  Tensor out(shape.rows, shape.cols);
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= out.size()) throw std::out_of_range("scatter_add: index out of range");
    out[indices[k]] += v[k];
  }
  return make(Op::ScatterAdd, std::move(out), {x}, 1.0, 0.0,
              std::make_shared<const std::vector<std::size_t>>(std::move(indices)));
}

Var l2_normalize_rows(const Var& x) {
  require_defined(x, "l2_normalize_rows");
  Var norms = sqrt(clamp_min(sum_cols(square(x)), kEpsilon * kEpsilon));
  return x / broadcast_to(norms, x.shape());
}

Var logsumexp(const Var& x) {
  require_defined(x, "logsumexp");
  const auto v = x.value().values();
  if (v.empty()) throw ShapeError("logsumexp of an empty tensor");
  const double shift = *std::max_element(v.begin(), v.end());
  return log(sum(exp(x - shift))) + shift;
}

Var logsumexp_rows(const Var& x) {
  require_defined(x, "logsumexp_rows");
  const Tensor& v = x.value();
  if (v.cols() == 0) throw ShapeError("logsumexp_rows with zero columns");
  Tensor shifts(v.rows(), 1);
  for (std::size_t r = 0; r < v.rows(); ++r) {
    auto row = v.row_view(r);
    shifts[r] = *std::max_element(row.begin(), row.end());
  }
  Var shift = constant(shifts);
  return log(sum_cols(exp(x - broadcast_to(shift, x.shape())))) + shift;
}

Var softplus(const Var& x) {
  require_defined(x, "softplus");
  // relu(x) + log(1 + exp(-|x|)); sign(0) is taken as -1 so the derivative at 0 is 1/2.
  Tensor neg_sign = map_values(x.value(), [](double v) { return v > 0.0 ? -1.0 : 1.0; });
  return relu(x) + log(exp(x * constant(std::move(neg_sign))) + 1.0);
}

Var concat_row_vectors(std::span<const Var> parts) {
  std::size_t total = 0;
  for (const auto& p : parts) {
    require_defined(p, "concat_row_vectors");
    if (p.shape().rows != 1) throw ShapeError("concat_row_vectors: expected 1 x k parts");
    total += p.shape().cols;
  }
  std::vector<Var> pieces;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t k = p.shape().cols;
    if (k == 0) continue;
    if (k == total) return p;
    std::vector<std::size_t> idx(k);
    std::iota(idx.begin(), idx.end(), offset);
    pieces.push_back(scatter_add(p, std::move(idx), {1, total}));
    offset += k;
  }
  if (pieces.empty()) return constant(Tensor(1, 0));
  Var out = pieces.front();
  for (std::size_t i = 1; i < pieces.size(); ++i) out = out + pieces[i];
  return out;
}

GradientRecord backward(const Var& target, std::span<const Var> params, bool record) {
  require_defined(target, "backward");
  if (!target.shape().is_scalar()) {
    throw std::invalid_argument("backward: target must be a scalar, got " +
                                to_string(target.shape()));
  }

  std::unordered_set<const Node*> wanted;
  for (const auto& p : params) {
    require_defined(p, "backward");
    wanted.insert(p.node());
  }

  // Post-order over the part of the graph that can carry gradient.
  std::vector<Var> order;
  std::unordered_map<const Node*, bool> relevant;
  {
    struct Frame {
      Var var;
      std::size_t next;
    };
    std::vector<Frame> stack;
    std::unordered_set<const Node*> visited;
    auto enterable = [&](const Var& v) {
      return v.requires_grad() || wanted.count(v.node()) != 0;
    };
    if (enterable(target)) {
      stack.push_back({target, 0});
      visited.insert(target.node());
    }
    while (!stack.empty()) {
      Frame& top = stack.back();
      auto parents = top.var.parents();
      if (top.var.op() != Op::Step && top.next < parents.size()) {
        const Var& p = parents[top.next++];
        if (enterable(p) && visited.insert(p.node()).second) stack.push_back({p, 0});
        continue;
      }
      bool rel = wanted.count(top.var.node()) != 0;
      if (top.var.op() != Op::Step) {
        for (const auto& p : parents) {
          auto it = relevant.find(p.node());
          if (it != relevant.end() && it->second) rel = true;
        }
      }
      relevant[top.var.node()] = rel;
      order.push_back(top.var);
      stack.pop_back();
    }
  }

  std::unordered_map<const Node*, Var> grads;
  if (!order.empty()) grads[target.node()] = constant(1.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const Var& v = *it;
    auto g = grads.find(v.node());
    if (g == grads.end() || !relevant[v.node()]) continue;
    const Var upstream = g->second;
    auto parents = v.parents();
    for (std::size_t i = 0; i < parents.size(); ++i) {
      auto rel = relevant.find(parents[i].node());
      if (rel == relevant.end() || !rel->second) continue;
      Var contribution = parent_adjoint(v, upstream, i);
      if (!contribution.defined()) continue;
      auto [slot, inserted] = grads.try_emplace(parents[i].node(), contribution);
      if (!inserted) slot->second = slot->second + contribution;
    }
  }

  GradientRecord rec;
  rec.target = target;
  rec.recorded = record;
  rec.with_respect_to.assign(params.begin(), params.end());
  rec.gradients.reserve(params.size());
  for (const auto& p : params) {
    auto it = grads.find(p.node());
    if (it == grads.end()) {
      log_notice("backward: parameter of shape " + to_string(p.shape()) +
                 " does not reach the target; using a zero gradient");
      rec.gradients.push_back(constant(Tensor(p.shape().rows, p.shape().cols)));
    } else if (record) {
      rec.gradients.push_back(it->second);
    } else {
      rec.gradients.push_back(constant(it->second.value()));
    }
  }
  return rec;
}

Var sgd_expression(const Var& param, const Var& gradient, double lr) {
  require_defined(param, "sgd_expression");
  require_defined(gradient, "sgd_expression");
  if (param.shape() != gradient.shape()) {
    throw ShapeError("sgd_expression: parameter " + to_string(param.shape()) + " vs gradient " +
                     to_string(gradient.shape()));
  }
  if (!(lr >= 0.0)) throw std::invalid_argument("sgd_expression: learning rate must be >= 0");
  return param - gradient * lr;
}

}  // namespace metaug::diff
