/*
 * Copyright 2026 The rigdistill Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "rigdistill/graph.h"

#include <string>
#include <utility>

#include "rigdistill/error.h"

namespace rigdistill {

template <typename T>
std::size_t ParameterStore<T>::add(std::string name, Tensor<T> value) {
  if (find(name)) fail(ErrorKind::kInvalidArgument, "duplicate parameter name: " + name);
  Tensor<T> grad(value.shape());
  names_.push_back(std::move(name));
  values_.push_back(std::move(value));
  grads_.push_back(std::move(grad));
  return values_.size() - 1;
}

template <typename T>
std::optional<std::size_t> ParameterStore<T>::find(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return i;
  }
  return std::nullopt;
}

template <typename T>
void ParameterStore<T>::zero_grad() {
  for (auto& g : grads_) g.fill(T(0));
}

template <typename T>
std::size_t ParameterStore<T>::count() const {
  std::size_t n = 0;
  for (const auto& v : values_) n += v.size();
  return n;
}

const char* to_string(OpKind kind) {
  switch (kind) {
    case OpKind::kInput: return "input";
    case OpKind::kParameter: return "parameter";
    case OpKind::kConv1d: return "conv1d";
    case OpKind::kGroupNorm: return "group_norm";
    case OpKind::kLayerNorm: return "layer_norm";
    case OpKind::kLinear: return "linear";
    case OpKind::kGelu: return "gelu";
    case OpKind::kTanh: return "tanh";
    case OpKind::kAdd: return "add";
    case OpKind::kFlatten: return "flatten";
    case OpKind::kStack: return "stack";
    case OpKind::kSum: return "sum";
    case OpKind::kDot: return "dot";
    case OpKind::kRowSqDist: return "row_sq_dist";
    case OpKind::kVelocitySqDist: return "velocity_sq_dist";
    case OpKind::kWeightedSum: return "weighted_sum";
  }
  return "unknown";
}

namespace {

[[noreturn]] void shape_error(const char* op, const std::string& detail) {
  fail(ErrorKind::kShape, std::string(op) + ": " + detail);
}

void expect_rank(const char* op, const char* what, const Shape& shape, std::size_t rank) {
  if (shape.size() != rank) {
    shape_error(op, std::string(what) + " must have rank " + std::to_string(rank) +
                        ", got " + shape_string(shape));
  }
}

void expect_extent(const char* op, const char* what, std::size_t got, std::size_t want) {
  if (got != want) {
    shape_error(op, std::string(what) + " is " + std::to_string(got) + ", expected " +
                        std::to_string(want));
  }
}

}  // namespace

template <typename T>
const typename Graph<T>::Node& Graph<T>::node(NodeId id) const {
  if (id >= nodes_.size()) fail(ErrorKind::kInvalidArgument, "unknown graph node");
  return nodes_[id];
}

template <typename T>
const Tensor<T>& Graph<T>::value(NodeId id) const {
  const Node& n = node(id);
  if (n.kind == OpKind::kParameter) return params_->value(n.param);
  return n.value;
}

template <typename T>
double Graph<T>::scalar(NodeId id) const {
  const Node& n = node(id);
  switch (n.kind) {
    case OpKind::kRowSqDist:
    case OpKind::kVelocitySqDist:
    case OpKind::kWeightedSum:
      return n.scalar;
    default:
      break;
  }
  const Tensor<T>& v = value(id);
  if (v.size() != 1) fail(ErrorKind::kNotScalar, "node is not a scalar");
  return static_cast<double>(v[0]);
}

template <typename T>
typename Graph<T>::Node Graph<T>::make(OpKind kind, std::vector<NodeId> inputs) const {
  Node n;
  n.kind = kind;
  for (NodeId id : inputs) n.requires_grad = n.requires_grad || node(id).requires_grad;
  n.inputs = std::move(inputs);
  return n;
}

template <typename T>
NodeId Graph<T>::push(Node n) {
  if (n.kind != OpKind::kParameter) require_finite<T>(n.value.data(), to_string(n.kind));
  nodes_.push_back(std::move(n));
  return nodes_.size() - 1;
}

template <typename T>
NodeId Graph<T>::input(Tensor<T> value, bool requires_grad) {
  Node n;
  n.kind = OpKind::kInput;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::parameter(std::size_t index) {
  if (!params_ || index >= params_->size()) {
    fail(ErrorKind::kInvalidArgument, "parameter index out of range");
  }
  Node n;
  n.kind = OpKind::kParameter;
  n.param = index;
  n.requires_grad = true;
  return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::conv1d(NodeId x, NodeId weight, NodeId bias, std::size_t stride,
                        std::size_t pad_left, std::size_t pad_right, std::size_t groups) {
  const Shape& xs = value(x).shape();
  const Shape& ws = value(weight).shape();
  expect_rank("conv1d", "input", xs, 2);
  expect_rank("conv1d", "weight", ws, 3);
  kernels::ConvShape s;
  s.in_channels = xs[0];
  s.in_length = xs[1];
  s.out_channels = ws[0];
  s.kernel = ws[2];
  s.stride = stride;
  s.pad_left = pad_left;
  s.pad_right = pad_right;
  s.groups = groups;
  s.validate();
  expect_extent("conv1d", "weight in_channels/groups", ws[1], s.in_per_group());
  expect_extent("conv1d", "bias length", value(bias).size(), s.out_channels);
  Node n = make(OpKind::kConv1d, {x, weight, bias});
  n.conv = s;
  n.value = Tensor<T>({s.out_channels, s.out_length()});
  kernels::conv1d_forward<T>(s, value(x).data(), value(weight).data(), value(bias).data(),
                             n.value.data());
  return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::group_norm(NodeId x, std::size_t groups, NodeId gamma, NodeId beta) {
  const Shape& xs = value(x).shape();
  expect_rank("group_norm", "input", xs, 2);
  expect_extent("group_norm", "gamma length", value(gamma).size(), xs[0]);
  expect_extent("group_norm", "beta length", value(beta).size(), xs[0]);
  Node n = make(OpKind::kGroupNorm, {x, gamma, beta});
  n.groups = groups;
  n.value = Tensor<T>(xs);
  kernels::group_norm_forward<T>(xs[0], xs[1], groups, value(x).data(), value(gamma).data(),
                                 value(beta).data(), n.value.data());
  return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::layer_norm(NodeId x, NodeId gamma, NodeId beta) {
  const Shape& xs = value(x).shape();
  expect_rank("layer_norm", "input", xs, 2);
  expect_extent("layer_norm", "gamma length", value(gamma).size(), xs[0]);
  expect_extent("layer_norm", "beta length", value(beta).size(), xs[0]);
  Node n = make(OpKind::kLayerNorm, {x, gamma, beta});
  n.value = Tensor<T>(xs);
  kernels::layer_norm_forward<T>(xs[0], xs[1], value(x).data(), value(gamma).data(),
                                 value(beta).data(), n.value.data());
  return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::linear(NodeId x, NodeId weight, NodeId bias) {
  const Shape& xs = value(x).shape();
  const Shape& ws = value(weight).shape();
  if (xs.size() != 1 && xs.size() != 2) {
    shape_error("linear", "input must have rank 1 or 2, got " + shape_string(xs));
  }
  expect_rank("linear", "weight", ws, 2);
  expect_extent("linear", "weight columns", ws[1], xs[0]);
  expect_extent("linear", "bias length", value(bias).size(), ws[0]);
  kernels::ConvShape s;
  s.in_channels = xs[0];
  s.in_length = xs.size() == 2 ? xs[1] : 1;
  s.out_channels = ws[0];
  s.kernel = 1;
  Node n = make(OpKind::kLinear, {x, weight, bias});
  n.conv = s;
  n.value = Tensor<T>(xs.size() == 2 ? Shape{ws[0], xs[1]} : Shape{ws[0]});
  kernels::conv1d_forward<T>(s, value(x).data(), value(weight).data(), value(bias).data(),
                             n.value.data());
  return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::gelu(NodeId x) {
  Node n = make(OpKind::kGelu, {x});
  n.value = Tensor<T>(value(x).shape());
  kernels::gelu_forward<T>(value(x).data(), n.value.data());
  return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::tanh(NodeId x) {
  Node n = make(OpKind::kTanh, {x});
  n.value = Tensor<T>(value(x).shape());
  kernels::tanh_forward<T>(value(x).data(), n.value.data());
  return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::add(NodeId a, NodeId b) {
  if (value(a).shape() != value(b).shape()) {
    shape_error("add", shape_string(value(a).shape()) + " vs " + shape_string(value(b).shape()));
  }
  Node n = make(OpKind::kAdd, {a, b});
  n.value = value(a);
  auto out = n.value.data();
  auto rhs = value(b).data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += rhs[i];
  return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::flatten(NodeId x) {
  Node n = make(OpKind::kFlatten, {x});
  n.value = value(x).reshaped({value(x).size()});
  return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::stack(const std::vector<NodeId>& rows) {
  if (rows.empty()) shape_error("stack", "needs at least one row");
  const std::size_t width = value(rows[0]).size();
  Node n = make(OpKind::kStack, rows);
  n.value = Tensor<T>({rows.size(), width});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto src = value(rows[r]).data();
    expect_extent("stack", "row width", src.size(), width);
    std::copy(src.begin(), src.end(), n.value.data().begin() + r * width);
  }
  return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::sum(NodeId x) {
  Node n = make(OpKind::kSum, {x});
  double acc = 0.0;
  for (T v : value(x).data()) acc += v;
  n.value = Tensor<T>(Shape{}, static_cast<T>(acc));
  return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::dot(NodeId x, Tensor<T> weights) {
  expect_extent("dot", "weight length", weights.size(), value(x).size());
  Node n = make(OpKind::kDot, {x});
  double acc = 0.0;
  const auto xv = value(x).data();
  for (std::size_t i = 0; i < xv.size(); ++i) acc += static_cast<double>(xv[i]) * weights[i];
  n.constant = std::move(weights);
  n.value = Tensor<T>(Shape{}, static_cast<T>(acc));
  return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::row_sq_dist(NodeId a, NodeId b) {
  const Shape& as = value(a).shape();
  expect_rank("row_sq_dist", "lhs", as, 2);
  if (as != value(b).shape()) {
    shape_error("row_sq_dist", shape_string(as) + " vs " + shape_string(value(b).shape()));
  }
  Node n = make(OpKind::kRowSqDist, {a, b});
  n.scalar = kernels::mean_row_sq_dist<T>(as[0], as[1], value(a).data(), value(b).data());
  n.value = Tensor<T>(Shape{}, static_cast<T>(n.scalar));
  return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::velocity_sq_dist(NodeId a, NodeId b) {
  const Shape& as = value(a).shape();
  expect_rank("velocity_sq_dist", "lhs", as, 2);
  if (as != value(b).shape()) {
    shape_error("velocity_sq_dist",
                shape_string(as) + " vs " + shape_string(value(b).shape()));
  }
  Node n = make(OpKind::kVelocitySqDist, {a, b});
  n.scalar = kernels::mean_velocity_sq_dist<T>(as[0], as[1], value(a).data(), value(b).data());
  n.value = Tensor<T>(Shape{}, static_cast<T>(n.scalar));
  return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::weighted_sum(const std::vector<NodeId>& scalars,
                              const std::vector<double>& weights) {
  if (scalars.size() != weights.size()) {
    shape_error("weighted_sum", "term and weight counts differ");
  }
  Node n = make(OpKind::kWeightedSum, scalars);
  double acc = 0.0;
  for (std::size_t i = 0; i < scalars.size(); ++i) acc += weights[i] * scalar(scalars[i]);
  n.weights = weights;
  n.scalar = acc;
  n.value = Tensor<T>(Shape{}, static_cast<T>(acc));
  return push(std::move(n));
}

template <typename T>
std::span<T> Graph<T>::grad_span(NodeId id) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return {};
  if (n.grad.empty()) n.grad = Tensor<T>(value(id).shape());
  return n.grad.data();
}

template <typename T>
void Graph<T>::backward(NodeId loss) {
  if (value(loss).size() != 1) {
    fail(ErrorKind::kNotScalar, "backward needs a scalar loss, got shape " +
                                    shape_string(value(loss).shape()));
  }
  for (Node& n : nodes_) n.grad = Tensor<T>();
  if (!nodes_[loss].requires_grad) return;
  grad_span(loss)[0] = T(1);
  for (NodeId id = loss + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.requires_grad || n.grad.empty()) continue;
    if (corrupt_ && *corrupt_ == n.kind) {
      for (T& g : n.grad.data()) g *= T(1.01);
    }
    backward_node(id);
  }
}

template <typename T>
void Graph<T>::backward_node(NodeId id) {
  const Node& n = nodes_[id];
  const auto dy = std::span<const T>(n.grad.data());
  const auto& in = n.inputs;
  switch (n.kind) {
    case OpKind::kInput:
      break;
    case OpKind::kParameter: {
      auto g = params_->grad(n.param).data();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += dy[i];
      break;
    }
    case OpKind::kConv1d:
    case OpKind::kLinear:
      kernels::conv1d_backward<T>(n.conv, value(in[0]).data(), value(in[1]).data(), dy,
                                  grad_span(in[0]), grad_span(in[1]), grad_span(in[2]));
      break;
    case OpKind::kGroupNorm: {
      const Shape& s = value(in[0]).shape();
      kernels::group_norm_backward<T>(s[0], s[1], n.groups, value(in[0]).data(),
                                      value(in[1]).data(), dy, grad_span(in[0]),
                                      grad_span(in[1]), grad_span(in[2]));
      break;
    }
    case OpKind::kLayerNorm: {
      const Shape& s = value(in[0]).shape();
      kernels::layer_norm_backward<T>(s[0], s[1], value(in[0]).data(), value(in[1]).data(),
                                      dy, grad_span(in[0]), grad_span(in[1]),
                                      grad_span(in[2]));
      break;
    }
    case OpKind::kGelu: {
      auto gx = grad_span(in[0]);
      if (!gx.empty()) kernels::gelu_backward<T>(value(in[0]).data(), dy, gx);
      break;
    }
    case OpKind::kTanh: {
      auto gx = grad_span(in[0]);
      if (!gx.empty()) kernels::tanh_backward<T>(n.value.data(), dy, gx);
      break;
    }
    case OpKind::kAdd:
    case OpKind::kFlatten:
      for (NodeId src : in) {
        auto g = grad_span(src);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += dy[i];
      }
      break;
    case OpKind::kStack: {
      const std::size_t width = n.value.dim(1);
      for (std::size_t r = 0; r < in.size(); ++r) {
        auto g = grad_span(in[r]);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += dy[r * width + i];
      }
      break;
    }
    case OpKind::kSum: {
      auto g = grad_span(in[0]);
      for (T& v : g) v += dy[0];
      break;
    }
    case OpKind::kDot: {
      auto g = grad_span(in[0]);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += dy[0] * n.constant[i];
      break;
    }
    case OpKind::kRowSqDist:
    case OpKind::kVelocitySqDist: {
      const Shape& s = value(in[0]).shape();
      auto ga = grad_span(in[0]);
      auto gb = grad_span(in[1]);
      if (n.kind == OpKind::kRowSqDist) {
        kernels::mean_row_sq_dist_backward<T>(s[0], s[1], value(in[0]).data(),
                                              value(in[1]).data(), dy[0], ga, gb);
      } else {
        kernels::mean_velocity_sq_dist_backward<T>(s[0], s[1], value(in[0]).data(),
                                                   value(in[1]).data(), dy[0], ga, gb);
      }
      break;
    }
    case OpKind::kWeightedSum:
      for (std::size_t i = 0; i < in.size(); ++i) {
        auto g = grad_span(in[i]);
        if (!g.empty()) g[0] += static_cast<T>(n.weights[i]) * dy[0];
      }
      break;
  }
}

template class ParameterStore<float>;
template class ParameterStore<double>;
template class Graph<float>;
template class Graph<double>;

}  // namespace rigdistill
