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

#ifndef RIGDISTILL_STUDENT_NET_H_
#define RIGDISTILL_STUDENT_NET_H_

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rigdistill/graph.h"
#include "rigdistill/kernels.h"
#include "rigdistill/tensor.h"
#include "rigdistill/types.h"

namespace rigdistill {

struct StudentConfig {
  std::size_t channels = 256;
  int future_ms = 256;
  std::uint64_t seed = 0;

  void validate() const;
};

enum class LayerKind {
  kConv,            // optional pre layer norm, conv, optional group norm, gelu
  kProjection,      // layer norm over channels, then a per-step linear map
  kPositional,      // depthwise wide conv, gelu, plus the projection output
  kFullyConnected,  // linear on the flattened features, optional gelu
  kOutput,          // tanh
};

struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::kConv;
  kernels::ConvShape conv;
  bool pre_layer_norm = false;
  bool group_norm = false;
  bool gelu = false;
  Shape output;
  // Indices into the parameter store, -1 when absent.
  int weight = -1;
  int bias = -1;
  int norm_gamma = -1;
  int norm_beta = -1;
};

// The 17-step layer plan for width C. Parameter indices follow the order in
// which build_student registers parameters.
std::vector<LayerSpec> layer_plan(std::size_t channels);

struct FeatureTaps {
  std::array<float, kHiddenWidth> f1{};
  std::array<float, kHiddenWidth> f2{};
  std::array<float, kRigDims> f3{};  // final layer before tanh
};

struct ResourceReport {
  std::uint64_t param_count = 0;
  std::uint64_t mac_count = 0;
  std::uint64_t peak_memory_bytes = 0;
};

class StudentNet {
 public:
  // Builds and initializes: Kaiming-uniform fan-in weights, zero biases,
  // unit gamma, zero beta.
  explicit StudentNet(const StudentConfig& config);
  // Wraps existing parameters; names and shapes must match the plan.
  StudentNet(const StudentConfig& config, ParameterStore<float> params);

  const StudentConfig& config() const { return config_; }
  const std::vector<LayerSpec>& plan() const { return plan_; }
  ParameterStore<float>& parameters() { return params_; }
  const ParameterStore<float>& parameters() const { return params_; }

  RigFrame forward(std::span<const float> window) const;
  std::pair<RigFrame, FeatureTaps> forward_with_taps(std::span<const float> window) const;

  // Input shape, then the output shape of every plan step, observed by
  // executing the network.
  std::vector<Shape> trace_shapes(std::span<const float> window) const;

  ResourceReport count_resources() const;

 private:
  StudentConfig config_;
  std::vector<LayerSpec> plan_;
  ParameterStore<float> params_;
};

struct StudentNodes {
  NodeId rig = 0;
  NodeId f1 = 0;
  NodeId f2 = 0;
  NodeId f3 = 0;
  std::vector<NodeId> layers;  // one per plan step
};

// Records the forward pass of one window ([1 x 8192] node) on a graph.
// params holds one parameter node per store entry, in store order.
template <typename T>
StudentNodes build_student_graph(Graph<T>& graph, const std::vector<LayerSpec>& plan,
                                 const std::vector<NodeId>& params, NodeId window);

template <typename T>
std::vector<NodeId> bind_parameters(Graph<T>& graph, const ParameterStore<T>& store);

}  // namespace rigdistill

#endif  // RIGDISTILL_STUDENT_NET_H_
