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

#include "rigdistill/student_net.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "rigdistill/error.h"

namespace rigdistill {

void StudentConfig::validate() const {
  if (channels < 1) fail(ErrorKind::kValidation, "channels must be >= 1");
  if (future_ms < 0 || future_ms > kWindowMs) {
    fail(ErrorKind::kValidation,
         "future_ms must lie in [0, 512], got " + std::to_string(future_ms));
  }
}

namespace {

kernels::ConvShape conv_shape(std::size_t cin, std::size_t cout, std::size_t length,
                              std::size_t kernel, std::size_t stride,
                              std::size_t pad_left = 0, std::size_t pad_right = 0,
                              std::size_t groups = 1) {
  kernels::ConvShape s;
  s.in_channels = cin;
  s.out_channels = cout;
  s.in_length = length;
  s.kernel = kernel;
  s.stride = stride;
  s.pad_left = pad_left;
  s.pad_right = pad_right;
  s.groups = groups;
  s.validate();
  return s;
}

bool is_linear(const LayerSpec& spec) {
  return spec.kind == LayerKind::kProjection || spec.kind == LayerKind::kFullyConnected;
}

Shape weight_shape(const LayerSpec& spec) {
  const auto& c = spec.conv;
  if (is_linear(spec)) return {c.out_channels, c.in_channels};
  return {c.out_channels, c.in_per_group(), c.kernel};
}

bool has_norm(const LayerSpec& spec) {
  return spec.pre_layer_norm || spec.group_norm;
}

}  // namespace

std::vector<LayerSpec> layer_plan(std::size_t channels) {
  const std::size_t C = channels;
  std::vector<LayerSpec> plan;
  int next_param = 0;
  auto add = [&](LayerSpec spec) {
    if (spec.kind != LayerKind::kOutput) {
      spec.weight = next_param++;
      spec.bias = next_param++;
    }
    if (has_norm(spec)) {
      spec.norm_gamma = next_param++;
      spec.norm_beta = next_param++;
    }
    plan.push_back(std::move(spec));
  };
  auto conv_layer = [&](std::string name, kernels::ConvShape shape, bool pre_ln,
                        bool gn) {
    LayerSpec spec;
    spec.name = std::move(name);
    spec.kind = LayerKind::kConv;
    spec.conv = shape;
    spec.pre_layer_norm = pre_ln;
    spec.group_norm = gn;
    spec.gelu = true;
    spec.output = {shape.out_channels, shape.out_length()};
    add(std::move(spec));
  };

  std::size_t length = kWindowSamples;
  conv_layer("conv0", conv_shape(1, C, length, 10, 5), false, true);
  length = plan.back().output[1];
  for (int i = 1; i <= 4; ++i) {
    conv_layer("conv" + std::to_string(i), conv_shape(C, C, length, 3, 2), false, false);
    length = plan.back().output[1];
  }
  for (int i = 5; i <= 6; ++i) {
    conv_layer("conv" + std::to_string(i), conv_shape(C, C, length, 2, 2), false, false);
    length = plan.back().output[1];
  }
  {
    LayerSpec spec;
    spec.name = "proj";
    spec.kind = LayerKind::kProjection;
    spec.conv = conv_shape(C, C, length, 1, 1);
    spec.pre_layer_norm = true;
    spec.output = {C, length};
    add(std::move(spec));
  }
  {
    LayerSpec spec;
    spec.name = "posconv";
    spec.kind = LayerKind::kPositional;
    spec.conv = conv_shape(C, C, length, 64, 1, 32, 31, C);
    spec.gelu = true;
    spec.output = {C, spec.conv.out_length()};
    add(std::move(spec));
  }
  conv_layer("conv7", conv_shape(C, C, length, 3, 2), true, false);
  length = plan.back().output[1];
  for (int i = 8; i <= 9; ++i) {
    conv_layer("conv" + std::to_string(i), conv_shape(C, C, length, 3, 2), false, false);
    length = plan.back().output[1];
  }
  conv_layer("conv10", conv_shape(C, C, length, 2, 2), false, false);
  length = plan.back().output[1];

  std::size_t width = C * length;
  const std::size_t fc_out[3] = {kHiddenWidth, kHiddenWidth, kRigDims};
  for (int i = 0; i < 3; ++i) {
    LayerSpec spec;
    spec.name = "fc" + std::to_string(i);
    spec.kind = LayerKind::kFullyConnected;
    spec.conv = conv_shape(width, fc_out[i], 1, 1, 1);
    spec.gelu = i < 2;
    spec.output = {fc_out[i]};
    add(std::move(spec));
    width = fc_out[i];
  }
  LayerSpec out;
  out.name = "tanh";
  out.kind = LayerKind::kOutput;
  out.output = {kRigDims};
  add(std::move(out));
  return plan;
}

StudentNet::StudentNet(const StudentConfig& config) : config_(config) {
  config_.validate();
  plan_ = layer_plan(config_.channels);
  std::mt19937_64 rng(config_.seed);
  for (const LayerSpec& spec : plan_) {
    if (spec.kind == LayerKind::kOutput) continue;
    const Shape ws = weight_shape(spec);
    const std::size_t fan_in = spec.conv.in_per_group() * spec.conv.kernel;
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Tensor<float> w(ws);
    for (float& v : w.data()) v = static_cast<float>(dist(rng));
    params_.add(spec.name + ".weight", std::move(w));
    params_.add(spec.name + ".bias", Tensor<float>({spec.conv.out_channels}));
    if (has_norm(spec)) {
      const std::size_t n = spec.group_norm ? spec.conv.out_channels : spec.conv.in_channels;
      params_.add(spec.name + ".norm.gamma", Tensor<float>({n}, 1.0f));
      params_.add(spec.name + ".norm.beta", Tensor<float>({n}));
    }
  }
}

StudentNet::StudentNet(const StudentConfig& config, ParameterStore<float> params)
    : config_(config), params_(std::move(params)) {
  config_.validate();
  plan_ = layer_plan(config_.channels);
  StudentNet fresh_layout(StudentConfig{config_.channels, config_.future_ms, 0});
  const auto& expected = fresh_layout.parameters();
  if (expected.size() != params_.size()) {
    fail(ErrorKind::kWeights, "expected " + std::to_string(expected.size()) +
                                  " parameter tensors, got " +
                                  std::to_string(params_.size()));
  }
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (expected.name(i) != params_.name(i)) {
      fail(ErrorKind::kWeights, "parameter " + std::to_string(i) + " is '" +
                                    params_.name(i) + "', expected '" + expected.name(i) +
                                    "'");
    }
    if (expected.value(i).shape() != params_.value(i).shape()) {
      fail(ErrorKind::kWeights, "parameter '" + params_.name(i) + "' has shape " +
                                    shape_string(params_.value(i).shape()) + ", expected " +
                                    shape_string(expected.value(i).shape()));
    }
    require_finite<float>(params_.value(i).data(), "parameter " + params_.name(i));
  }
}

RigFrame StudentNet::forward(std::span<const float> window) const {
  return forward_with_taps(window).first;
}

std::pair<RigFrame, FeatureTaps> StudentNet::forward_with_taps(
    std::span<const float> window) const {
  if (window.size() != kWindowSamples) {
    fail(ErrorKind::kShape, "window must have 8192 samples, got " +
                                std::to_string(window.size()));
  }
  struct Workspace {
    std::vector<float> cur, next, norm, residual;
  };
  thread_local Workspace ws;
  auto P = [&](int index) { return std::span<const float>(params_.value(index).data()); };

  std::pair<RigFrame, FeatureTaps> result;
  std::span<const float> src = window;
  int fc_index = 0;
  for (const LayerSpec& spec : plan_) {
    const auto& c = spec.conv;
    switch (spec.kind) {
      case LayerKind::kConv:
      case LayerKind::kProjection: {
        std::span<const float> conv_in = src;
        if (spec.pre_layer_norm) {
          ws.norm.resize(src.size());
          kernels::layer_norm_forward<float>(c.in_channels, c.in_length, src,
                                             P(spec.norm_gamma), P(spec.norm_beta), ws.norm);
          conv_in = ws.norm;
        }
        ws.next.resize(c.output_size());
        kernels::conv1d_forward<float>(c, conv_in, P(spec.weight), P(spec.bias), ws.next);
        if (spec.group_norm) {
          kernels::group_norm_forward<float>(c.out_channels, c.out_length(), c.out_channels,
                                             ws.next, P(spec.norm_gamma), P(spec.norm_beta),
                                             ws.next);
        }
        if (spec.gelu) kernels::gelu_forward<float>(ws.next, ws.next);
        if (spec.kind == LayerKind::kProjection) ws.residual = ws.next;
        break;
      }
      case LayerKind::kPositional: {
        ws.next.resize(c.output_size());
        kernels::conv1d_forward<float>(c, src, P(spec.weight), P(spec.bias), ws.next);
        kernels::gelu_forward<float>(ws.next, ws.next);
        for (std::size_t i = 0; i < ws.next.size(); ++i) ws.next[i] += ws.residual[i];
        break;
      }
      case LayerKind::kFullyConnected: {
        ws.next.resize(c.output_size());
        kernels::conv1d_forward<float>(c, src, P(spec.weight), P(spec.bias), ws.next);
        if (spec.gelu) kernels::gelu_forward<float>(ws.next, ws.next);
        float* tap = fc_index == 0   ? result.second.f1.data()
                     : fc_index == 1 ? result.second.f2.data()
                                     : result.second.f3.data();
        std::copy(ws.next.begin(), ws.next.end(), tap);
        ++fc_index;
        break;
      }
      case LayerKind::kOutput:
        kernels::tanh_forward<float>(src, result.first);
        require_finite<float>(result.first, "student forward");
        return result;
    }
    std::swap(ws.cur, ws.next);
    src = ws.cur;
  }
  fail(ErrorKind::kInternal, "layer plan has no output step");
}

std::vector<Shape> StudentNet::trace_shapes(std::span<const float> window) const {
  if (window.size() != kWindowSamples) {
    fail(ErrorKind::kShape, "window must have 8192 samples, got " +
                                std::to_string(window.size()));
  }
  ParameterStore<float> copy = params_;
  Graph<float> graph(&copy);
  const auto params = bind_parameters(graph, copy);
  const NodeId x = graph.input(
      Tensor<float>({1, kWindowSamples}, std::vector<float>(window.begin(), window.end())));
  const StudentNodes nodes = build_student_graph(graph, plan_, params, x);
  std::vector<Shape> shapes{graph.value(x).shape()};
  for (NodeId id : nodes.layers) shapes.push_back(graph.value(id).shape());
  return shapes;
}

ResourceReport StudentNet::count_resources() const {
  ResourceReport report;
  report.param_count = params_.count();
  std::size_t in = kWindowSamples;
  std::size_t residual = 0;
  std::size_t peak = 0;
  for (const LayerSpec& spec : plan_) {
    const std::size_t out = shape_size(spec.output);
    std::size_t live = in + out + residual;
    if (spec.kind != LayerKind::kOutput) {
      report.mac_count += spec.conv.macs();
      live += kernels::conv1d_workspace(spec.conv, sizeof(float));
    }
    if (spec.pre_layer_norm) live += in;
    peak = std::max(peak, live);
    if (spec.kind == LayerKind::kProjection) residual = out;
    if (spec.kind == LayerKind::kPositional) residual = 0;
    in = out;
  }
  report.peak_memory_bytes = 4 * (report.param_count + peak);
  return report;
}

template <typename T>
std::vector<NodeId> bind_parameters(Graph<T>& graph, const ParameterStore<T>& store) {
  std::vector<NodeId> ids;
  ids.reserve(store.size());
  for (std::size_t i = 0; i < store.size(); ++i) ids.push_back(graph.parameter(i));
  return ids;
}

template <typename T>
StudentNodes build_student_graph(Graph<T>& graph, const std::vector<LayerSpec>& plan,
                                 const std::vector<NodeId>& params, NodeId window) {
  StudentNodes nodes;
  NodeId x = window;
  NodeId residual = window;
  std::vector<NodeId> fc;
  auto P = [&](int index) { return params.at(static_cast<std::size_t>(index)); };
  for (const LayerSpec& spec : plan) {
    const auto& c = spec.conv;
    NodeId h = x;
    switch (spec.kind) {
      case LayerKind::kConv:
        if (spec.pre_layer_norm) h = graph.layer_norm(h, P(spec.norm_gamma), P(spec.norm_beta));
        h = graph.conv1d(h, P(spec.weight), P(spec.bias), c.stride, c.pad_left, c.pad_right,
                         c.groups);
        if (spec.group_norm) {
          h = graph.group_norm(h, c.out_channels, P(spec.norm_gamma), P(spec.norm_beta));
        }
        if (spec.gelu) h = graph.gelu(h);
        break;
      case LayerKind::kProjection:
        h = graph.layer_norm(h, P(spec.norm_gamma), P(spec.norm_beta));
        h = graph.linear(h, P(spec.weight), P(spec.bias));
        residual = h;
        break;
      case LayerKind::kPositional:
        h = graph.conv1d(h, P(spec.weight), P(spec.bias), c.stride, c.pad_left, c.pad_right,
                         c.groups);
        h = graph.gelu(h);
        h = graph.add(h, residual);
        break;
      case LayerKind::kFullyConnected:
        if (graph.value(h).rank() != 1) h = graph.flatten(h);
        h = graph.linear(h, P(spec.weight), P(spec.bias));
        if (spec.gelu) h = graph.gelu(h);
        fc.push_back(h);
        break;
      case LayerKind::kOutput:
        h = graph.tanh(h);
        break;
    }
    nodes.layers.push_back(h);
    x = h;
  }
  if (fc.size() != 3) fail(ErrorKind::kInternal, "layer plan must have three FC layers");
  nodes.f1 = fc[0];
  nodes.f2 = fc[1];
  nodes.f3 = fc[2];
  nodes.rig = x;
  return nodes;
}

template StudentNodes build_student_graph<float>(Graph<float>&, const std::vector<LayerSpec>&,
                                                 const std::vector<NodeId>&, NodeId);
template StudentNodes build_student_graph<double>(Graph<double>&,
                                                  const std::vector<LayerSpec>&,
                                                  const std::vector<NodeId>&, NodeId);
template std::vector<NodeId> bind_parameters<float>(Graph<float>&, const ParameterStore<float>&);
template std::vector<NodeId> bind_parameters<double>(Graph<double>&,
                                                     const ParameterStore<double>&);

}  // namespace rigdistill
