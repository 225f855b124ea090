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

#include "rigdistill/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <random>
#include <sstream>

#include "rigdistill/student_net.h"

namespace rigdistill {
namespace {

using Builder = std::function<NodeId(Graph<double>&, const std::vector<NodeId>&)>;

struct Case {
  std::string name;
  std::vector<Tensor<double>> inputs;
  Builder build;
};

class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}

  std::size_t index(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_);
  }
  Tensor<double> tensor(Shape shape, double lo = -1.0, double hi = 1.0) {
    Tensor<double> t(std::move(shape));
    std::uniform_real_distribution<double> dist(lo, hi);
    for (double& v : t.data()) v = dist(rng_);
    return t;
  }
  std::mt19937_64& rng() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

std::vector<std::size_t> divisors(std::size_t n) {
  std::vector<std::size_t> out;
  for (std::size_t d = 1; d <= n; ++d) {
    if (n % d == 0) out.push_back(d);
  }
  return out;
}

Case conv_case(Sampler& s, std::size_t max_size, int variant) {
  kernels::ConvShape c;
  c.in_channels = variant == 0 ? s.index(1, 3) : s.index(2, 4);
  if (variant == 2) {
    c.groups = c.in_channels;
    c.out_channels = c.in_channels;
  } else if (variant == 1) {
    const auto divs = divisors(c.in_channels);
    c.groups = divs[s.index(divs.size() > 1 ? 1 : 0, divs.size() - 1)];
    c.out_channels = c.groups * s.index(1, 2);
  } else {
    c.groups = 1;
    c.out_channels = s.index(1, 3);
  }
  c.kernel = s.index(1, 4);
  c.stride = s.index(1, 3);
  c.pad_left = s.index(0, 2);
  c.pad_right = s.index(0, 2);
  const std::size_t max_len = std::max<std::size_t>(1, max_size / c.in_channels);
  const std::size_t min_len =
      c.kernel > c.pad_left + c.pad_right ? c.kernel - c.pad_left - c.pad_right : 1;
  c.in_length = s.index(std::min(min_len, max_len), max_len);
  const char* names[] = {"conv1d", "conv1d_grouped", "conv1d_depthwise"};
  Case out;
  out.name = names[variant];
  out.inputs = {s.tensor({c.in_channels, c.in_length}),
                s.tensor({c.out_channels, c.in_channels / c.groups, c.kernel}),
                s.tensor({c.out_channels})};
  out.build = [c](Graph<double>& g, const std::vector<NodeId>& in) {
    return g.conv1d(in[0], in[1], in[2], c.stride, c.pad_left, c.pad_right, c.groups);
  };
  return out;
}

Case norm_case(Sampler& s, std::size_t max_size, bool group) {
  // layer norm reduces over channels, so it gets at least three
  const std::size_t channels = group ? s.index(1, 4) : s.index(3, 6);
  const std::size_t length = s.index(group ? 3 : 1, std::max<std::size_t>(3, max_size / channels));
  Case out;
  out.name = group ? "group_norm" : "layer_norm";
  out.inputs = {s.tensor({channels, length}), s.tensor({channels}, 0.5, 1.5),
                s.tensor({channels})};
  if (group) {
    const auto divs = divisors(channels);
    const std::size_t groups = divs[s.index(0, divs.size() - 1)];
    out.build = [groups](Graph<double>& g, const std::vector<NodeId>& in) {
      return g.group_norm(in[0], groups, in[1], in[2]);
    };
  } else {
    out.build = [](Graph<double>& g, const std::vector<NodeId>& in) {
      return g.layer_norm(in[0], in[1], in[2]);
    };
  }
  return out;
}

Case linear_case(Sampler& s, bool matrix) {
  const std::size_t n = s.index(1, 5);
  const std::size_t m = s.index(1, 5);
  Case out;
  out.name = matrix ? "linear_matrix" : "linear_vector";
  out.inputs = {matrix ? s.tensor({n, s.index(1, 4)}) : s.tensor({n}), s.tensor({m, n}),
                s.tensor({m})};
  out.build = [](Graph<double>& g, const std::vector<NodeId>& in) {
    return g.linear(in[0], in[1], in[2]);
  };
  return out;
}

Case unary_case(Sampler& s, std::size_t max_size, const std::string& name) {
  Case out;
  out.name = name;
  out.inputs = {s.tensor({s.index(1, 4), s.index(1, max_size / 4)}, -3.0, 3.0)};
  if (name == "gelu") {
    out.build = [](Graph<double>& g, const std::vector<NodeId>& in) { return g.gelu(in[0]); };
  } else if (name == "tanh") {
    out.build = [](Graph<double>& g, const std::vector<NodeId>& in) { return g.tanh(in[0]); };
  } else if (name == "flatten") {
    out.build = [](Graph<double>& g, const std::vector<NodeId>& in) {
      return g.flatten(in[0]);
    };
  } else {
    out.build = [](Graph<double>& g, const std::vector<NodeId>& in) { return g.sum(in[0]); };
  }
  return out;
}

Case binary_case(Sampler& s, std::size_t max_size, const std::string& name) {
  const Shape shape{s.index(2, 4), s.index(1, max_size / 8)};
  Case out;
  out.name = name;
  out.inputs = {s.tensor(shape), s.tensor(shape)};
  if (name == "add") {
    out.build = [](Graph<double>& g, const std::vector<NodeId>& in) {
      return g.add(in[0], in[1]);
    };
  } else if (name == "row_sq_dist") {
    out.build = [](Graph<double>& g, const std::vector<NodeId>& in) {
      return g.row_sq_dist(in[0], in[1]);
    };
  } else {
    out.build = [](Graph<double>& g, const std::vector<NodeId>& in) {
      return g.velocity_sq_dist(in[0], in[1]);
    };
  }
  return out;
}

Case stack_case(Sampler& s) {
  const std::size_t rows = s.index(1, 4);
  const std::size_t width = s.index(1, 6);
  Case out;
  out.name = "stack";
  for (std::size_t r = 0; r < rows; ++r) out.inputs.push_back(s.tensor({width}));
  out.build = [](Graph<double>& g, const std::vector<NodeId>& in) { return g.stack(in); };
  return out;
}

Case dot_case(Sampler& s, std::size_t max_size) {
  Case out;
  out.name = "dot";
  out.inputs = {s.tensor({s.index(1, max_size)})};
  Tensor<double> w = s.tensor(out.inputs[0].shape());
  out.build = [w](Graph<double>& g, const std::vector<NodeId>& in) { return g.dot(in[0], w); };
  return out;
}

Case weighted_sum_case(Sampler& s) {
  const std::size_t terms = s.index(1, 4);
  Case out;
  out.name = "weighted_sum";
  std::vector<double> weights;
  for (std::size_t i = 0; i < terms; ++i) {
    out.inputs.push_back(s.tensor({2, s.index(2, 4)}));
    weights.push_back(s.tensor({1}, -2.0, 2.0)[0]);
  }
  out.build = [weights](Graph<double>& g, const std::vector<NodeId>& in) {
    std::vector<NodeId> terms;
    for (NodeId id : in) terms.push_back(g.sum(id));
    return g.weighted_sum(terms, weights);
  };
  return out;
}

// Central differences at h and h/2 combined to cancel the h^2 term.
template <typename F>
double richardson(double& x, double h, F&& f) {
  const double base = x;
  auto central = [&](double step) {
    x = base + step;
    const double up = f();
    x = base - step;
    const double down = f();
    x = base;
    return (up - down) / (2.0 * step);
  };
  const double coarse = central(h);
  const double fine = central(0.5 * h);
  return (4.0 * fine - coarse) / 3.0;
}

// Analytic vs central difference on every input element of one case.
double check_case(const Case& c, Sampler& s, const GradCheckConfig& config,
                  std::size_t* coordinates) {
  Graph<double> graph;
  std::vector<NodeId> ids;
  for (const auto& t : c.inputs) ids.push_back(graph.input(t, true));
  const NodeId out = c.build(graph, ids);
  const Tensor<double> proj = s.tensor(graph.value(out).shape(), -1.0, 1.0);
  const NodeId loss = graph.dot(out, proj);
  graph.corrupt_backward(config.corrupt);
  graph.backward(loss);

  auto evaluate = [&](const std::vector<Tensor<double>>& inputs) {
    Graph<double> g;
    std::vector<NodeId> in;
    for (const auto& t : inputs) in.push_back(g.input(t, false));
    return g.scalar(g.dot(c.build(g, in), proj));
  };

  double worst = 0.0;
  std::vector<Tensor<double>> shifted = c.inputs;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const Tensor<double>& analytic = graph.grad(ids[i]);
    for (std::size_t e = 0; e < shifted[i].size(); ++e) {
      double& x = shifted[i][e];
      const double numeric = richardson(x, config.step, [&] { return evaluate(shifted); });
      const double a = analytic.empty() ? 0.0 : analytic[e];
      worst = std::max(worst, gradient_rel_error(a, numeric));
      ++*coordinates;
    }
  }
  return worst;
}

void check_network(std::uint64_t seed, const GradCheckConfig& config, GradCheckEntry& entry) {
  StudentConfig sc;
  sc.channels = config.network_channels;
  sc.future_ms = 256;
  sc.seed = seed;
  const StudentNet net(sc);
  ParameterStore<double> store = net.parameters().cast<double>();
  Sampler s(seed ^ 0x9e3779b97f4a7c15ULL);
  const Tensor<double> window = s.tensor({1, kWindowSamples}, -0.5, 0.5);
  const Tensor<double> proj = s.tensor({kRigDims});

  auto run = [&](bool with_backward) {
    Graph<double> g(&store);
    const auto pids = bind_parameters(g, store);
    const NodeId win = g.input(window, false);
    const StudentNodes nodes = build_student_graph(g, net.plan(), pids, win);
    const NodeId loss = g.dot(nodes.rig, proj);
    if (with_backward) {
      store.zero_grad();
      g.corrupt_backward(config.corrupt);
      g.backward(loss);
    }
    return g.scalar(loss);
  };
  run(true);
  std::vector<Tensor<double>> analytic;
  for (std::size_t i = 0; i < store.size(); ++i) analytic.push_back(store.grad(i));

  for (std::size_t n = 0; n < config.network_coords; ++n) {
    // cycle through tensors so every layer is visited
    const std::size_t t = (seed * config.network_coords + n) % store.size();
    const std::size_t e = s.index(0, store.value(t).size() - 1);
    const double numeric =
        richardson(store.value(t)[e], config.step, [&] { return run(false); });
    entry.max_rel_error = std::max(entry.max_rel_error, gradient_rel_error(analytic[t][e], numeric));
    ++entry.coordinates;
  }
  ++entry.cases;
}

}  // namespace

double gradient_rel_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), kGradErrorFloor});
  return std::abs(analytic - numeric) / scale;
}

bool GradCheckReport::passed() const {
  return std::all_of(entries.begin(), entries.end(),
                     [](const GradCheckEntry& e) { return e.passed; });
}

std::string GradCheckReport::to_text() const {
  std::ostringstream os;
  for (const auto& e : entries) {
    os << "gradcheck op=" << e.name << " cases=" << e.cases << " coords=" << e.coordinates
       << " max_rel_err=" << std::scientific << std::setprecision(3) << e.max_rel_error
       << std::defaultfloat << " status=" << (e.passed ? "PASS" : "FAIL") << '\n';
  }
  os << "gradcheck summary tolerance=" << std::scientific << std::setprecision(1) << tolerance
     << std::defaultfloat << " status=" << (passed() ? "PASS" : "FAIL") << '\n';
  return os.str();
}

GradCheckReport run_gradcheck(const GradCheckConfig& config) {
  if (config.seeds == 0 || config.max_size < 8 || !(config.step > 0.0) ||
      !(config.tolerance > 0.0)) {
    fail(ErrorKind::kInvalidArgument, "gradcheck needs seeds > 0, max_size >= 8, step > 0");
  }
  const std::vector<std::string> order = {
      "conv1d", "conv1d_grouped", "conv1d_depthwise", "group_norm", "layer_norm",
      "linear_vector", "linear_matrix", "gelu", "tanh", "add", "flatten", "stack",
      "sum", "dot", "row_sq_dist", "velocity_sq_dist", "weighted_sum"};
  std::vector<GradCheckEntry> entries(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) entries[i].name = order[i];

  for (std::size_t k = 0; k < config.seeds; ++k) {
    Sampler s(config.seed * 1000003ULL + k);
    std::vector<Case> cases;
    for (int v = 0; v < 3; ++v) cases.push_back(conv_case(s, config.max_size, v));
    cases.push_back(norm_case(s, config.max_size, true));
    cases.push_back(norm_case(s, config.max_size, false));
    cases.push_back(linear_case(s, false));
    cases.push_back(linear_case(s, true));
    for (const char* name : {"gelu", "tanh"}) cases.push_back(unary_case(s, config.max_size, name));
    cases.push_back(binary_case(s, config.max_size, "add"));
    cases.push_back(unary_case(s, config.max_size, "flatten"));
    cases.push_back(stack_case(s));
    cases.push_back(unary_case(s, config.max_size, "sum"));
    cases.push_back(dot_case(s, config.max_size));
    cases.push_back(binary_case(s, config.max_size, "row_sq_dist"));
    cases.push_back(binary_case(s, config.max_size, "velocity_sq_dist"));
    cases.push_back(weighted_sum_case(s));
    for (std::size_t i = 0; i < cases.size(); ++i) {
      GradCheckEntry& e = entries[i];
      e.max_rel_error = std::max(e.max_rel_error, check_case(cases[i], s, config, &e.coordinates));
      ++e.cases;
    }
  }
  if (config.network) {
    GradCheckEntry net;
    net.name = "network_c" + std::to_string(config.network_channels);
    for (std::size_t k = 0; k < config.network_seeds; ++k) {
      check_network(config.seed * 1000003ULL + k, config, net);
    }
    entries.push_back(net);
  }
  GradCheckReport report;
  report.tolerance = config.tolerance;
  for (auto& e : entries) e.passed = e.max_rel_error < config.tolerance;
  report.entries = std::move(entries);
  return report;
}

}  // namespace rigdistill
