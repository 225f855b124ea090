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

#ifndef RIGDISTILL_GRAPH_H_
#define RIGDISTILL_GRAPH_H_

// Tape-style reverse-mode differentiation over the small operator set the
// student network needs. Nodes are appended in evaluation order, so the
// insertion order is a topological order and backward() simply walks it in
// reverse.
//
// Graph<float> trains; Graph<double> is the shadow path used for gradient
// checking. A graph is not thread-safe; separate graphs are independent.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "rigdistill/kernels.h"
#include "rigdistill/tensor.h"

namespace rigdistill {

template <typename T>
class ParameterStore {
 public:
  std::size_t add(std::string name, Tensor<T> value);

  std::size_t size() const { return values_.size(); }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  Tensor<T>& value(std::size_t i) { return values_.at(i); }
  const Tensor<T>& value(std::size_t i) const { return values_.at(i); }
  Tensor<T>& grad(std::size_t i) { return grads_.at(i); }
  const Tensor<T>& grad(std::size_t i) const { return grads_.at(i); }
  std::optional<std::size_t> find(const std::string& name) const;

  void zero_grad();
  // Total number of scalar parameters.
  std::size_t count() const;

  template <typename U>
  ParameterStore<U> cast() const {
    ParameterStore<U> out;
    for (std::size_t i = 0; i < size(); ++i) out.add(names_[i], values_[i].template cast<U>());
    return out;
  }

  bool operator==(const ParameterStore& other) const {
    return names_ == other.names_ && values_ == other.values_;
  }

 private:
  std::vector<std::string> names_;
  std::vector<Tensor<T>> values_;
  std::vector<Tensor<T>> grads_;
};

enum class OpKind {
  kInput,
  kParameter,
  kConv1d,
  kGroupNorm,
  kLayerNorm,
  kLinear,
  kGelu,
  kTanh,
  kAdd,
  kFlatten,
  kStack,
  kSum,
  kDot,
  kRowSqDist,
  kVelocitySqDist,
  kWeightedSum,
};

const char* to_string(OpKind kind);

using NodeId = std::size_t;

template <typename T>
class Graph {
 public:
  // params may be null for graphs without parameters.
  explicit Graph(ParameterStore<T>* params = nullptr) : params_(params) {}

  NodeId input(Tensor<T> value, bool requires_grad = false);
  NodeId parameter(std::size_t index);

  // x: Cin x L, weight: Cout x Cin/groups x k, bias: Cout.
  NodeId conv1d(NodeId x, NodeId weight, NodeId bias, std::size_t stride,
                std::size_t pad_left, std::size_t pad_right, std::size_t groups);
  NodeId group_norm(NodeId x, std::size_t groups, NodeId gamma, NodeId beta);
  NodeId layer_norm(NodeId x, NodeId gamma, NodeId beta);
  // x: n or n x L (applied per column), weight: m x n, bias: m.
  NodeId linear(NodeId x, NodeId weight, NodeId bias);
  NodeId gelu(NodeId x);
  NodeId tanh(NodeId x);
  NodeId add(NodeId a, NodeId b);
  NodeId flatten(NodeId x);
  // Equal-sized nodes become rows of an N x D matrix.
  NodeId stack(const std::vector<NodeId>& rows);
  NodeId sum(NodeId x);
  // <x, w> with a fixed w; used to project outputs to a scalar.
  NodeId dot(NodeId x, Tensor<T> weights);
  NodeId row_sq_dist(NodeId a, NodeId b);
  NodeId velocity_sq_dist(NodeId a, NodeId b);
  NodeId weighted_sum(const std::vector<NodeId>& scalars, const std::vector<double>& weights);

  const Tensor<T>& value(NodeId id) const;
  // Scalar nodes keep a double copy of their value for reporting.
  double scalar(NodeId id) const;
  // Gradient of the last backward() loss w.r.t. a node; empty if none flowed.
  const Tensor<T>& grad(NodeId id) const { return nodes_.at(id).grad; }
  OpKind kind(NodeId id) const { return nodes_.at(id).kind; }
  std::size_t size() const { return nodes_.size(); }

  // Accumulates d loss / d param into the parameter store's grads.
  void backward(NodeId loss);

  // Test hook: the backward of the given op kind is deliberately wrong.
  void corrupt_backward(std::optional<OpKind> kind) { corrupt_ = kind; }

 private:
  struct Node {
    OpKind kind = OpKind::kInput;
    std::vector<NodeId> inputs;
    Tensor<T> value;
    Tensor<T> grad;
    bool requires_grad = false;
    std::size_t param = 0;
    kernels::ConvShape conv;
    std::size_t groups = 1;
    std::vector<double> weights;
    Tensor<T> constant;
    double scalar = 0.0;
  };

  NodeId push(Node node);
  Node make(OpKind kind, std::vector<NodeId> inputs) const;
  const Node& node(NodeId id) const;
  std::span<T> grad_span(NodeId id);
  void backward_node(NodeId id);

  ParameterStore<T>* params_;
  std::vector<Node> nodes_;
  std::optional<OpKind> corrupt_;
};

extern template class ParameterStore<float>;
extern template class ParameterStore<double>;
extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace rigdistill

#endif  // RIGDISTILL_GRAPH_H_
