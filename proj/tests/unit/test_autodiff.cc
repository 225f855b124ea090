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

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "rigdistill/adam.h"
#include "rigdistill/error.h"
#include "rigdistill/gradcheck.h"
#include "rigdistill/graph.h"
#include "rigdistill/kernels.h"

using namespace rigdistill;
namespace k = rigdistill::kernels;

namespace {

std::vector<double> random_values(std::size_t n, std::mt19937_64& rng, double lo = -1.0,
                                  double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

std::vector<float> to_float(const std::vector<double>& v) { return {v.begin(), v.end()}; }

}  // namespace

TEST_SUITE("autodiff") {

TEST_CASE("conv1d output length matches the closed form") {
  for (std::size_t len = 1; len <= 20; ++len) {
    for (std::size_t kernel = 1; kernel <= 6; ++kernel) {
      for (std::size_t stride = 1; stride <= 4; ++stride) {
        for (std::size_t pl = 0; pl <= 3; ++pl) {
          for (std::size_t pr = 0; pr <= 3; ++pr) {
            if (len + pl + pr < kernel) continue;
            k::ConvShape s;
            s.in_length = len;
            s.kernel = kernel;
            s.stride = stride;
            s.pad_left = pl;
            s.pad_right = pr;
            Graph<double> g;
            const NodeId x = g.input(Tensor<double>({1, len}, 1.0));
            const NodeId w = g.input(Tensor<double>({1, 1, kernel}, 1.0));
            const NodeId b = g.input(Tensor<double>({1}, 0.0));
            const NodeId y = g.conv1d(x, w, b, stride, pl, pr, 1);
            // count every start position by hand
            std::size_t starts = 0;
            for (std::size_t p = 0; p + kernel <= len + pl + pr; p += stride) ++starts;
            CHECK(g.value(y).dim(1) == starts);
            CHECK(s.out_length() == starts);
          }
        }
      }
    }
  }
}

TEST_CASE("conv1d hand case and shape errors") {
  Graph<double> g;
  const NodeId x = g.input(Tensor<double>({1, 4}, std::vector<double>{1, 2, 3, 4}));
  const NodeId w = g.input(Tensor<double>({1, 1, 2}, std::vector<double>{1, -1}));
  const NodeId b = g.input(Tensor<double>({1}, std::vector<double>{0.5}));
  const NodeId y = g.conv1d(x, w, b, 1, 1, 0, 1);
  // padded input 0 1 2 3 4
  CHECK(g.value(y).storage() == std::vector<double>{-0.5, -0.5, -0.5, -0.5});
  const NodeId bad = g.input(Tensor<double>({2}, 0.0));
  CHECK_THROWS_AS(g.conv1d(x, w, bad, 1, 0, 0, 1), Error);
  try {
    g.conv1d(x, w, b, 1, 0, 0, 2);
    FAIL("expected a shape error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kShape);
  }
}

TEST_CASE("parallel kernels agree with the serial reference") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 40; ++trial) {
    std::uniform_int_distribution<std::size_t> pick(1, 5);
    k::ConvShape s;
    s.groups = pick(rng) % 2 == 0 ? 1 : pick(rng);
    s.in_channels = s.groups * pick(rng);
    s.out_channels = s.groups * pick(rng);
    s.kernel = pick(rng);
    s.stride = pick(rng) % 3 + 1;
    s.pad_left = pick(rng) - 1;
    s.pad_right = pick(rng) - 1;
    s.in_length = s.kernel + pick(rng) * 13;
    const auto x = random_values(s.input_size(), rng);
    const auto w = random_values(s.weight_size(), rng);
    const auto b = random_values(s.out_channels, rng);
    std::vector<double> y(s.output_size()), y_ref(s.output_size());
    k::conv1d_forward<double>(s, x, w, b, y);
    k::reference::conv1d_forward<double>(s, x, w, b, y_ref);
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(y[i] == doctest::Approx(y_ref[i]).epsilon(1e-12));

    // backward against the reference
    const auto gy = random_values(y.size(), rng);
    std::vector<double> gx(x.size()), gw(w.size()), gb(b.size());
    std::vector<double> gx_ref(x.size()), gw_ref(w.size()), gb_ref(b.size());
    k::conv1d_backward<double>(s, x, w, gy, gx, gw, gb);
    k::reference::conv1d_backward<double>(s, x, w, gy, gx_ref, gw_ref, gb_ref);
    for (std::size_t i = 0; i < gx.size(); ++i) CHECK(gx[i] == doctest::Approx(gx_ref[i]).epsilon(1e-12));
    for (std::size_t i = 0; i < gw.size(); ++i) CHECK(gw[i] == doctest::Approx(gw_ref[i]).epsilon(1e-12));
    for (std::size_t i = 0; i < gb.size(); ++i) CHECK(gb[i] == doctest::Approx(gb_ref[i]).epsilon(1e-12));
  }

  const std::size_t c = 6, len = 37;
  const auto x = to_float(random_values(c * len, rng));
  const auto gamma = to_float(random_values(c, rng, 0.5, 1.5));
  const auto beta = to_float(random_values(c, rng));
  std::vector<float> y(x.size()), y_ref(x.size());
  k::group_norm_forward<float>(c, len, 3, x, gamma, beta, y);
  k::reference::group_norm_forward<float>(c, len, 3, x, gamma, beta, y_ref);
  for (std::size_t i = 0; i < y.size(); ++i) CHECK(y[i] == doctest::Approx(y_ref[i]).epsilon(1e-5));
  k::layer_norm_forward<float>(c, len, x, gamma, beta, y);
  k::reference::layer_norm_forward<float>(c, len, x, gamma, beta, y_ref);
  for (std::size_t i = 0; i < y.size(); ++i) CHECK(y[i] == doctest::Approx(y_ref[i]).epsilon(1e-5));
  k::gelu_forward<float>(x, y);
  k::reference::gelu_forward<float>(x, y_ref);
  for (std::size_t i = 0; i < y.size(); ++i) CHECK(y[i] == doctest::Approx(y_ref[i]).epsilon(1e-6));
}

TEST_CASE("norm layers standardize each group") {
  std::mt19937_64 rng(5);
  const std::size_t c = 8, len = 50, groups = 4;
  const auto x = random_values(c * len, rng, -3.0, 5.0);
  const std::vector<double> gamma(c, 1.0), beta(c, 0.0);
  std::vector<double> y(x.size());
  k::group_norm_forward<double>(c, len, groups, x, gamma, beta, y);
  const std::size_t per = (c / groups) * len;
  for (std::size_t g = 0; g < groups; ++g) {
    double mean = 0.0, var = 0.0;
    for (std::size_t i = 0; i < per; ++i) mean += y[g * per + i];
    mean /= per;
    for (std::size_t i = 0; i < per; ++i) var += (y[g * per + i] - mean) * (y[g * per + i] - mean);
    var /= per;
    CHECK(std::abs(mean) < 1e-5);
    CHECK(std::abs(var - 1.0) < 1e-3);
  }
  k::layer_norm_forward<double>(c, len, x, gamma, beta, y);
  for (std::size_t t = 0; t < len; ++t) {
    double mean = 0.0, var = 0.0;
    for (std::size_t ch = 0; ch < c; ++ch) mean += y[ch * len + t];
    mean /= c;
    for (std::size_t ch = 0; ch < c; ++ch) var += (y[ch * len + t] - mean) * (y[ch * len + t] - mean);
    var /= c;
    CHECK(std::abs(mean) < 1e-5);
    CHECK(std::abs(var - 1.0) < 1e-3);
  }
}

TEST_CASE("layer norm of standardized columns is the identity up to epsilon") {
  // columns (1, -1): mean 0, variance 1
  const std::vector<double> x{1, -1, -1, 1};
  const std::vector<double> gamma{1, 1}, beta{0, 0};
  std::vector<double> y(4);
  k::layer_norm_forward<double>(2, 2, x, gamma, beta, y);
  const double scale = 1.0 / std::sqrt(1.0 + k::kNormEpsilon);
  for (std::size_t i = 0; i < 4; ++i) CHECK(y[i] == doctest::Approx(x[i] * scale).epsilon(1e-15));
}

TEST_CASE("linear layer examples") {
  Graph<double> g;
  const NodeId x = g.input(Tensor<double>({2}, std::vector<double>{3, -2}));
  const NodeId eye = g.input(Tensor<double>({2, 2}, std::vector<double>{1, 0, 0, 1}));
  const NodeId zero_b = g.input(Tensor<double>({2}, 0.0));
  CHECK(g.value(g.linear(x, eye, zero_b)).storage() == std::vector<double>{3, -2});
  const NodeId zero_w = g.input(Tensor<double>({2, 2}, 0.0));
  const NodeId b = g.input(Tensor<double>({2}, std::vector<double>{0.25, 7}));
  CHECK(g.value(g.linear(x, zero_w, b)).storage() == std::vector<double>{0.25, 7});
  const NodeId w = g.input(Tensor<double>({2, 2}, std::vector<double>{1, 2, 3, 4}));
  // [1 2; 3 4] (3, -2) + (0.25, 7) = (-0.75, 8)
  CHECK(g.value(g.linear(x, w, b)).storage() == std::vector<double>{-0.75, 8});
  const NodeId wide = g.input(Tensor<double>({2, 3}, 0.0));
  CHECK_THROWS_AS(g.linear(x, wide, b), Error);
}

TEST_CASE("gelu and tanh values") {
  const std::vector<double> x{0.0, 1.0, 12.0, -12.0};
  std::vector<double> y(4), t(4);
  k::gelu_forward<double>(x, y);
  k::tanh_forward<double>(x, t);
  CHECK(y[0] == 0.0);
  CHECK(t[0] == 0.0);
  // long double erf as the oracle
  const long double oracle = 0.5L * (1.0L + std::erf(1.0L / std::sqrt(2.0L)));
  CHECK(y[1] == doctest::Approx(static_cast<double>(oracle)).epsilon(1e-14));
  CHECK(y[1] == doctest::Approx(0.84134).epsilon(1e-5));
  CHECK(y[2] == doctest::Approx(12.0).epsilon(1e-12));
  CHECK(std::abs(y[3]) < 1e-12);
  CHECK(t[2] == doctest::Approx(static_cast<double>(std::tanh(12.0L))).epsilon(1e-14));
  CHECK(t[2] < 1.0);
}

TEST_CASE("elementwise results do not depend on buffer address") {
  std::mt19937_64 rng(12);
  std::normal_distribution<float> d(0.0f, 2.0f);
  const std::size_t n = 5000;
  std::vector<float> base(n), dy(n);
  for (float& v : base) v = d(rng);
  for (float& v : dy) v = d(rng);
  std::vector<float> ref_gelu(n), ref_tanh(n), ref_grad(n, 0.0f);
  k::gelu_forward<float>(base, ref_gelu);
  k::tanh_forward<float>(base, ref_tanh);
  k::gelu_backward<float>(base, dy, ref_grad);
  for (std::size_t shift = 1; shift < 17; ++shift) {
    std::vector<float> x(n + shift), g(n + shift), t(n + shift), dys(n + shift), gx(n + shift, 0.0f);
    std::copy(base.begin(), base.end(), x.begin() + shift);
    std::copy(dy.begin(), dy.end(), dys.begin() + shift);
    const std::span<const float> xs(x.data() + shift, n), ds(dys.data() + shift, n);
    k::gelu_forward<float>(xs, std::span<float>(g.data() + shift, n));
    k::tanh_forward<float>(xs, std::span<float>(t.data() + shift, n));
    k::gelu_backward<float>(xs, ds, std::span<float>(gx.data() + shift, n));
    CHECK(std::equal(ref_gelu.begin(), ref_gelu.end(), g.begin() + shift));
    CHECK(std::equal(ref_tanh.begin(), ref_tanh.end(), t.begin() + shift));
    CHECK(std::equal(ref_grad.begin(), ref_grad.end(), gx.begin() + shift));
  }
}

TEST_CASE("backward of sum is all ones") {
  Graph<double> g;
  const NodeId x = g.input(Tensor<double>({3, 4}, 0.5), true);
  g.backward(g.sum(x));
  for (double v : g.grad(x).data()) CHECK(v == 1.0);
}

TEST_CASE("backward of a squared residual matches the closed form") {
  ParameterStore<double> store;
  std::mt19937_64 rng(2);
  const std::size_t m = 3, n = 4;
  store.add("w", Tensor<double>({m, n}, random_values(m * n, rng)));
  store.add("b", Tensor<double>({m}, 0.0));
  const auto xv = random_values(n, rng);
  const auto yv = random_values(m, rng);
  Graph<double> g(&store);
  const NodeId w = g.parameter(0);
  const NodeId b = g.parameter(1);
  const NodeId x = g.input(Tensor<double>({n}, xv));
  const NodeId pred = g.stack({g.linear(x, w, b)});
  const NodeId target = g.input(Tensor<double>({1, m}, yv));
  store.zero_grad();
  g.backward(g.row_sq_dist(pred, target));
  for (std::size_t i = 0; i < m; ++i) {
    double r = -yv[i];
    for (std::size_t j = 0; j < n; ++j) r += store.value(0).at(i, j) * xv[j];
    for (std::size_t j = 0; j < n; ++j) {
      CHECK(store.grad(0).at(i, j) == doctest::Approx(2.0 * r * xv[j]).epsilon(1e-12));
    }
  }
}

TEST_CASE("backward rejects a non-scalar loss") {
  Graph<double> g;
  const NodeId x = g.input(Tensor<double>({3}, 1.0), true);
  try {
    g.backward(g.gelu(x));
    FAIL("expected kNotScalar");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kNotScalar);
  }
}

TEST_CASE("graph forward is deterministic") {
  std::mt19937_64 rng(9);
  const auto xv = random_values(2 * 40, rng);
  const auto wv = random_values(3 * 2 * 5, rng);
  auto run = [&] {
    Graph<float> g;
    const NodeId x = g.input(Tensor<float>({2, 40}, to_float(xv)));
    const NodeId w = g.input(Tensor<float>({3, 2, 5}, to_float(wv)));
    const NodeId b = g.input(Tensor<float>({3}, 0.1f));
    return g.value(g.gelu(g.conv1d(x, w, b, 2, 1, 1, 1)));
  };
  CHECK(run() == run());
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  ParameterStore<float> store;
  store.add("p", Tensor<float>({3}, std::vector<float>{1, -2, 3}));
  const Tensor<float> before = store.value(0);
  store.zero_grad();
  Adam<float> adam(AdamConfig{});
  adam.step(store);
  CHECK(store.value(0) == before);
}

TEST_CASE("adam: one bias-corrected step with g = 1 moves by -lr") {
  ParameterStore<double> store;
  store.add("p", Tensor<double>({1}, 2.0));
  store.zero_grad();
  store.grad(0)[0] = 1.0;
  AdamConfig cfg;
  cfg.learning_rate = 0.1;
  Adam<double> adam(cfg);
  adam.step(store);
  // m_hat = 1, v_hat = 1, step = 0.1 / (1 + 1e-8)
  CHECK(store.value(0)[0] == doctest::Approx(2.0 - 0.1 / (1.0 + 1e-8)).epsilon(1e-15));
}

TEST_CASE("adam: two steps reduce a quadratic") {
  ParameterStore<double> store;
  store.add("p", Tensor<double>({1}, 3.0));
  AdamConfig cfg;
  cfg.learning_rate = 0.1;
  Adam<double> adam(cfg);
  auto loss = [&] { return store.value(0)[0] * store.value(0)[0]; };
  const double start = loss();
  for (int i = 0; i < 2; ++i) {
    store.zero_grad();
    store.grad(0)[0] = 2.0 * store.value(0)[0];
    adam.step(store);
  }
  CHECK(loss() < start);
  CHECK(adam.steps() == 2);
}

TEST_CASE("adam rejects mismatched moments") {
  ParameterStore<double> a;
  a.add("p", Tensor<double>({2}, 1.0));
  Adam<double> adam(AdamConfig{});
  a.zero_grad();
  adam.step(a);
  ParameterStore<double> b;
  b.add("p", Tensor<double>({3}, 1.0));
  b.zero_grad();
  CHECK_THROWS_AS(adam.step(b), Error);
}

TEST_CASE("gradient check passes, is reproducible, and catches a corrupted op") {
  GradCheckConfig cfg;
  cfg.seeds = 5;
  cfg.network_seeds = 2;
  const GradCheckReport a = run_gradcheck(cfg);
  CHECK(a.passed());
  CHECK(a.to_text() == run_gradcheck(cfg).to_text());
  cfg.corrupt = OpKind::kLayerNorm;
  const GradCheckReport bad = run_gradcheck(cfg);
  CHECK_FALSE(bad.passed());
  for (const auto& e : bad.entries) {
    if (e.name == "layer_norm") CHECK_FALSE(e.passed);
    if (e.name == "gelu") CHECK(e.passed);
  }
}

TEST_CASE("relative error definition") {
  CHECK(gradient_rel_error(1.0, 1.0) == 0.0);
  CHECK(gradient_rel_error(2.0, 1.0) == doctest::Approx(0.5));
  // below the floor the difference is scaled by the floor
  CHECK(gradient_rel_error(1e-6, 0.0) == doctest::Approx(1e-6 / kGradErrorFloor));
}

}  // TEST_SUITE
