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

#include "rigdistill/kernels.h"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <unsupported/Eigen/SpecialFunctions>

#include "rigdistill/error.h"
#include "rigdistill/tensor.h"

namespace rigdistill {

std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

}  // namespace rigdistill

namespace rigdistill::kernels {

void ConvShape::validate() const {
  auto bad = [](const std::string& what) { fail(ErrorKind::kShape, "conv1d: " + what); };
  if (in_channels == 0) bad("in_channels must be positive");
  if (out_channels == 0) bad("out_channels must be positive");
  if (kernel == 0) bad("kernel must be positive");
  if (stride == 0) bad("stride must be positive");
  if (groups == 0) bad("groups must be positive");
  if (in_channels % groups != 0) {
    bad("in_channels (" + std::to_string(in_channels) + ") not divisible by groups (" +
        std::to_string(groups) + ")");
  }
  if (out_channels % groups != 0) {
    bad("out_channels (" + std::to_string(out_channels) +
        ") not divisible by groups (" + std::to_string(groups) + ")");
  }
  if (padded_length() < kernel) {
    bad("padded length (" + std::to_string(padded_length()) + ") shorter than kernel (" +
        std::to_string(kernel) + ")");
  }
}

namespace {

template <typename T>
struct Blocking {
#if defined(__AVX512F__)
  static constexpr std::size_t kVectorBytes = 64;
#else
  static constexpr std::size_t kVectorBytes = 32;
#endif
  static constexpr std::size_t kRows = 8;
  static constexpr std::size_t kCols = 2 * kVectorBytes / sizeof(T);
};

// Below this many output columns the packed GEMM mostly multiplies padding.
constexpr std::size_t kDirectColumnLimit = 8;
constexpr std::size_t kElementwiseChunk = 4096;

template <typename T>
std::vector<T>& scratch(int slot) {
  thread_local std::vector<T> buffers[3];
  return buffers[slot];
}

void check_size(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    fail(ErrorKind::kShape, std::string(what) + " has " + std::to_string(got) +
                                " values, expected " + std::to_string(want));
  }
}

void check_optional_size(std::size_t got, std::size_t want, const char* what) {
  if (got != 0) check_size(got, want, what);
}

template <typename T>
void micro_kernel(const T* __restrict a_panel, const T* __restrict b_panel,
                  std::size_t depth, T* __restrict out, std::size_t ldo,
                  std::size_t rows, std::size_t cols, const T* __restrict bias) {
  constexpr std::size_t MR = Blocking<T>::kRows;
  constexpr std::size_t NR = Blocking<T>::kCols;
  T acc[MR][NR] = {};
  for (std::size_t k = 0; k < depth; ++k) {
    const T* b = b_panel + k * NR;
    const T* a = a_panel + k * MR;
#pragma GCC unroll 8
    for (std::size_t r = 0; r < MR; ++r) {
      const T av = a[r];
#pragma GCC unroll 32
      for (std::size_t c = 0; c < NR; ++c) acc[r][c] += av * b[c];
    }
  }
  for (std::size_t r = 0; r < rows; ++r) {
    const T b = bias ? bias[r] : T(0);
    for (std::size_t c = 0; c < cols; ++c) out[r * ldo + c] = acc[r][c] + b;
  }
}

// Weight rows of one group packed as [row tile][k][MR].
template <typename T>
void pack_weights(const ConvShape& s, std::size_t group, std::span<const T> weight,
                  std::vector<T>& packed) {
  constexpr std::size_t MR = Blocking<T>::kRows;
  const std::size_t rows = s.out_per_group();
  const std::size_t depth = s.in_per_group() * s.kernel;
  const std::size_t tiles = (rows + MR - 1) / MR;
  packed.assign(tiles * depth * MR, T(0));
  const T* w = weight.data() + group * rows * depth;
  for (std::size_t row = 0; row < rows; ++row) {
    T* dst = packed.data() + (row / MR) * depth * MR + row % MR;
    const T* src = w + row * depth;
    for (std::size_t k = 0; k < depth; ++k) dst[k * MR] = src[k];
  }
}

// im2col of one group, packed as [column tile][k][NR]; k = channel * kernel + tap.
template <typename T>
void pack_columns(const ConvShape& s, std::size_t group, std::span<const T> input,
                  std::vector<T>& packed) {
  constexpr std::size_t NR = Blocking<T>::kCols;
  const std::size_t cin = s.in_per_group();
  const std::size_t depth = cin * s.kernel;
  const std::size_t cols = s.out_length();
  const std::size_t tiles = (cols + NR - 1) / NR;
  const std::ptrdiff_t len = static_cast<std::ptrdiff_t>(s.in_length);
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(s.pad_left);
  const std::ptrdiff_t stride = static_cast<std::ptrdiff_t>(s.stride);
  packed.resize(tiles * depth * NR);
  T* base = packed.data();
  const T* x = input.data() + group * cin * s.in_length;
#pragma omp parallel for schedule(static)
  for (std::size_t tile = 0; tile < tiles; ++tile) {
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const T* row = x + ci * s.in_length;
      for (std::size_t j = 0; j < s.kernel; ++j) {
        T* dst = base + (tile * depth + ci * s.kernel + j) * NR;
        const std::ptrdiff_t t0 = static_cast<std::ptrdiff_t>(tile * NR);
        for (std::size_t c = 0; c < NR; ++c) {
          const std::ptrdiff_t t = t0 + static_cast<std::ptrdiff_t>(c);
          const std::ptrdiff_t pos = t * stride + static_cast<std::ptrdiff_t>(j) - pad;
          dst[c] = (t < static_cast<std::ptrdiff_t>(cols) && pos >= 0 && pos < len) ? row[pos]
                                                                                    : T(0);
        }
      }
    }
  }
}

// Fixed-order dot product; the lane split lets the compiler vectorize
// without reassociating.
template <typename T>
T dot_lanes(const T* __restrict a, const T* __restrict b, std::size_t n) {
  constexpr std::size_t L = 2 * Blocking<T>::kVectorBytes / sizeof(T);
  T acc[L] = {};
  std::size_t k = 0;
  for (; k + L <= n; k += L) {
#pragma GCC unroll 32
    for (std::size_t l = 0; l < L; ++l) acc[l] += a[k + l] * b[k + l];
  }
  T tail = T(0);
  for (; k < n; ++k) tail += a[k] * b[k];
  for (std::size_t width = L / 2; width > 0; width /= 2) {
    for (std::size_t l = 0; l < width; ++l) acc[l] += acc[l + width];
  }
  return acc[0] + tail;
}

template <typename T>
void unfold_transposed(const ConvShape& s, std::size_t group, std::span<const T> input,
                       std::vector<T>& out);

// Mean and biased variance in double, lane-split for the same reason.
template <typename T>
std::pair<double, double> moments(const T* x, std::size_t n) {
  constexpr std::size_t L = 8;
  double acc[L] = {};
  std::size_t k = 0;
  for (; k + L <= n; k += L) {
    for (std::size_t l = 0; l < L; ++l) acc[l] += static_cast<double>(x[k + l]);
  }
  double sum = 0.0;
  for (std::size_t l = 0; l < L; ++l) sum += acc[l];
  for (; k < n; ++k) sum += x[k];
  const double mean = sum / static_cast<double>(n);
  double sq[L] = {};
  k = 0;
  for (; k + L <= n; k += L) {
    for (std::size_t l = 0; l < L; ++l) {
      const double d = static_cast<double>(x[k + l]) - mean;
      sq[l] += d * d;
    }
  }
  double total = 0.0;
  for (std::size_t l = 0; l < L; ++l) total += sq[l];
  for (; k < n; ++k) {
    const double d = static_cast<double>(x[k]) - mean;
    total += d * d;
  }
  return {mean, total / static_cast<double>(n)};
}

template <typename T>
void conv_depthwise(const ConvShape& s, std::span<const T> input, std::span<const T> weight,
                    std::span<const T> bias, std::span<T> output) {
  const std::size_t cols = s.out_length();
  const std::size_t padded = s.padded_length();
#pragma omp parallel for schedule(static)
  for (std::size_t c = 0; c < s.out_channels; ++c) {
    std::vector<T>& row = scratch<T>(2);
    row.assign(padded, T(0));
    const T* x = input.data() + c * s.in_length;
    std::copy(x, x + s.in_length, row.begin() + s.pad_left);
    const T* w = weight.data() + c * s.kernel;
    const T b = bias.empty() ? T(0) : bias[c];
    for (std::size_t t = 0; t < cols; ++t) {
      output[c * cols + t] = dot_lanes(w, row.data() + t * s.stride, s.kernel) + b;
    }
  }
}

template <typename T>
void conv_direct(const ConvShape& s, std::span<const T> input, std::span<const T> weight,
                 std::span<const T> bias, std::span<T> output) {
  const std::size_t rows = s.out_per_group();
  const std::size_t depth = s.in_per_group() * s.kernel;
  const std::size_t cols = s.out_length();
  std::vector<T>& unfolded = scratch<T>(0);
  for (std::size_t g = 0; g < s.groups; ++g) {
    unfold_transposed(s, g, input, unfolded);
    const T* xt = unfolded.data();
#pragma omp parallel for schedule(static)
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t co = g * rows + r;
      const T* w = weight.data() + co * depth;
      const T b = bias.empty() ? T(0) : bias[co];
      for (std::size_t t = 0; t < cols; ++t) {
        output[co * cols + t] = dot_lanes(w, xt + t * depth, depth) + b;
      }
    }
  }
}

// Transposed im2col of one group: [t][k].
template <typename T>
void unfold_transposed(const ConvShape& s, std::size_t group, std::span<const T> input,
                       std::vector<T>& out) {
  const std::size_t cin = s.in_per_group();
  const std::size_t depth = cin * s.kernel;
  const std::size_t cols = s.out_length();
  const std::ptrdiff_t len = static_cast<std::ptrdiff_t>(s.in_length);
  out.resize(cols * depth);
  const T* x = input.data() + group * cin * s.in_length;
  T* base = out.data();
#pragma omp parallel for schedule(static)
  for (std::size_t t = 0; t < cols; ++t) {
    const std::ptrdiff_t origin = static_cast<std::ptrdiff_t>(t * s.stride) -
                                  static_cast<std::ptrdiff_t>(s.pad_left);
    T* dst = base + t * depth;
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const T* row = x + ci * s.in_length;
      for (std::size_t j = 0; j < s.kernel; ++j) {
        const std::ptrdiff_t pos = origin + static_cast<std::ptrdiff_t>(j);
        dst[ci * s.kernel + j] = (pos >= 0 && pos < len) ? row[pos] : T(0);
      }
    }
  }
}

template <typename T>
using ArrayMap = Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>>;
template <typename T>
using ConstArrayMap = Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>>;

// Eigen peels unaligned heads with scalar math, so results on a mapped span
// would depend on its address. Chunks are copied into aligned buffers first.
template <typename T>
Eigen::Array<T, Eigen::Dynamic, 1>& aligned_scratch(int slot) {
  thread_local Eigen::Array<T, Eigen::Dynamic, 1> buffers[3];
  return buffers[slot];
}

template <typename T>
bool uses_direct_path(const ConvShape& s) {
  return (s.in_per_group() == 1 && s.out_per_group() == 1) ||
         s.out_length() < kDirectColumnLimit;
}

template <typename T>
std::size_t packed_values(const ConvShape& s) {
  if (s.in_per_group() == 1 && s.out_per_group() == 1) return s.padded_length();
  if (uses_direct_path<T>(s)) return s.out_length() * s.in_per_group() * s.kernel;
  constexpr std::size_t MR = Blocking<T>::kRows;
  constexpr std::size_t NR = Blocking<T>::kCols;
  const std::size_t depth = s.in_per_group() * s.kernel;
  const std::size_t rows = s.out_per_group();
  const std::size_t cols = s.out_length();
  return ((rows + MR - 1) / MR) * MR * depth + ((cols + NR - 1) / NR) * NR * depth;
}

}  // namespace

std::size_t conv1d_workspace(const ConvShape& shape, std::size_t value_bytes) {
  shape.validate();
  return value_bytes == sizeof(double) ? packed_values<double>(shape)
                                       : packed_values<float>(shape);
}

template <typename T>
void conv1d_forward(const ConvShape& s, std::span<const T> input,
                    std::span<const T> weight, std::span<const T> bias,
                    std::span<T> output) {
  s.validate();
  check_size(input.size(), s.input_size(), "conv1d input");
  check_size(weight.size(), s.weight_size(), "conv1d weight");
  check_optional_size(bias.size(), s.out_channels, "conv1d bias");
  check_size(output.size(), s.output_size(), "conv1d output");

  const std::size_t cols = s.out_length();
  if (s.in_per_group() == 1 && s.out_per_group() == 1) {
    conv_depthwise(s, input, weight, bias, output);
    return;
  }
  if (uses_direct_path<T>(s)) {
    conv_direct(s, input, weight, bias, output);
    return;
  }

  constexpr std::size_t MR = Blocking<T>::kRows;
  constexpr std::size_t NR = Blocking<T>::kCols;
  const std::size_t rows = s.out_per_group();
  const std::size_t depth = s.in_per_group() * s.kernel;
  const std::size_t row_tiles = (rows + MR - 1) / MR;
  const std::size_t col_tiles = (cols + NR - 1) / NR;
  std::vector<T>& a_packed = scratch<T>(0);
  std::vector<T>& b_packed = scratch<T>(1);

  for (std::size_t g = 0; g < s.groups; ++g) {
    pack_weights(s, g, weight, a_packed);
    pack_columns(s, g, input, b_packed);
    T* out = output.data() + g * rows * cols;
    const T* bias_g = bias.empty() ? nullptr : bias.data() + g * rows;
    const T* a_base = a_packed.data();
    const T* b_base = b_packed.data();
#pragma omp parallel for collapse(2) schedule(static)
    for (std::size_t ct = 0; ct < col_tiles; ++ct) {
      for (std::size_t rt = 0; rt < row_tiles; ++rt) {
        const std::size_t r0 = rt * MR;
        const std::size_t c0 = ct * NR;
        micro_kernel<T>(a_base + rt * depth * MR, b_base + ct * depth * NR, depth,
                        out + r0 * cols + c0, cols, std::min(MR, rows - r0),
                        std::min(NR, cols - c0), bias_g ? bias_g + r0 : nullptr);
      }
    }
  }
}

template <typename T>
void conv1d_backward(const ConvShape& s, std::span<const T> input,
                     std::span<const T> weight, std::span<const T> grad_output,
                     std::span<T> grad_input, std::span<T> grad_weight,
                     std::span<T> grad_bias) {
  s.validate();
  check_size(input.size(), s.input_size(), "conv1d input");
  check_size(weight.size(), s.weight_size(), "conv1d weight");
  check_size(grad_output.size(), s.output_size(), "conv1d grad_output");
  check_optional_size(grad_input.size(), s.input_size(), "conv1d grad_input");
  check_optional_size(grad_weight.size(), s.weight_size(), "conv1d grad_weight");
  check_optional_size(grad_bias.size(), s.out_channels, "conv1d grad_bias");

  const std::size_t cin = s.in_per_group();
  const std::size_t rows = s.out_per_group();
  const std::size_t depth = cin * s.kernel;
  const std::size_t cols = s.out_length();
  const std::ptrdiff_t len = static_cast<std::ptrdiff_t>(s.in_length);

  if (!grad_bias.empty()) {
    for (std::size_t co = 0; co < s.out_channels; ++co) {
      T acc = T(0);
      const T* dy = grad_output.data() + co * cols;
      for (std::size_t t = 0; t < cols; ++t) acc += dy[t];
      grad_bias[co] += acc;
    }
  }
  if (grad_weight.empty() && grad_input.empty()) return;

  std::vector<T>& unfolded = scratch<T>(0);
  std::vector<T>& grad_unfolded = scratch<T>(1);
  for (std::size_t g = 0; g < s.groups; ++g) {
    const T* dy_g = grad_output.data() + g * rows * cols;
    if (!grad_weight.empty()) {
      unfold_transposed(s, g, input, unfolded);
      const T* xt = unfolded.data();
      T* gw = grad_weight.data() + g * rows * depth;
#pragma omp parallel for schedule(static)
      for (std::size_t co = 0; co < rows; ++co) {
        T* dst = gw + co * depth;
        const T* dy = dy_g + co * cols;
        for (std::size_t t = 0; t < cols; ++t) {
          const T d = dy[t];
          const T* src = xt + t * depth;
          for (std::size_t k = 0; k < depth; ++k) dst[k] += d * src[k];
        }
      }
    }
    if (!grad_input.empty()) {
      grad_unfolded.assign(cols * depth, T(0));
      T* dxt = grad_unfolded.data();
      const T* w = weight.data() + g * rows * depth;
#pragma omp parallel for schedule(static)
      for (std::size_t t = 0; t < cols; ++t) {
        T* dst = dxt + t * depth;
        for (std::size_t co = 0; co < rows; ++co) {
          const T d = dy_g[co * cols + t];
          const T* src = w + co * depth;
          for (std::size_t k = 0; k < depth; ++k) dst[k] += d * src[k];
        }
      }
      T* gx = grad_input.data() + g * cin * s.in_length;
#pragma omp parallel for schedule(static)
      for (std::size_t ci = 0; ci < cin; ++ci) {
        T* row = gx + ci * s.in_length;
        for (std::size_t t = 0; t < cols; ++t) {
          const std::ptrdiff_t origin = static_cast<std::ptrdiff_t>(t * s.stride) -
                                        static_cast<std::ptrdiff_t>(s.pad_left);
          const T* src = dxt + t * depth + ci * s.kernel;
          for (std::size_t j = 0; j < s.kernel; ++j) {
            const std::ptrdiff_t pos = origin + static_cast<std::ptrdiff_t>(j);
            if (pos >= 0 && pos < len) row[pos] += src[j];
          }
        }
      }
    }
  }
}

template <typename T>
void group_norm_forward(std::size_t channels, std::size_t length, std::size_t groups,
                        std::span<const T> input, std::span<const T> gamma,
                        std::span<const T> beta, std::span<T> output) {
  if (groups == 0 || channels % groups != 0) {
    fail(ErrorKind::kShape, "group_norm: channels (" + std::to_string(channels) +
                                ") not divisible by num_groups (" +
                                std::to_string(groups) + ")");
  }
  check_size(input.size(), channels * length, "group_norm input");
  check_size(gamma.size(), channels, "group_norm gamma");
  check_size(beta.size(), channels, "group_norm beta");
  check_size(output.size(), channels * length, "group_norm output");
  const std::size_t per_group = channels / groups;
  const std::size_t count = per_group * length;
#pragma omp parallel for schedule(static)
  for (std::size_t g = 0; g < groups; ++g) {
    const T* x = input.data() + g * count;
    const auto [mean, var] = moments(x, count);
    const T m = static_cast<T>(mean);
    const T rstd = static_cast<T>(1.0 / std::sqrt(var + kNormEpsilon));
    T* y = output.data() + g * count;
    for (std::size_t c = 0; c < per_group; ++c) {
      const std::size_t ch = g * per_group + c;
      const T scale = gamma[ch];
      const T shift = beta[ch];
      for (std::size_t t = 0; t < length; ++t) {
        const std::size_t i = c * length + t;
        y[i] = (x[i] - m) * rstd * scale + shift;
      }
    }
  }
}

template <typename T>
void group_norm_backward(std::size_t channels, std::size_t length, std::size_t groups,
                         std::span<const T> input, std::span<const T> gamma,
                         std::span<const T> grad_output, std::span<T> grad_input,
                         std::span<T> grad_gamma, std::span<T> grad_beta) {
  if (groups == 0 || channels % groups != 0) {
    fail(ErrorKind::kShape, "group_norm: channels not divisible by num_groups");
  }
  check_size(input.size(), channels * length, "group_norm input");
  check_size(grad_output.size(), channels * length, "group_norm grad_output");
  check_optional_size(grad_input.size(), channels * length, "group_norm grad_input");
  check_optional_size(grad_gamma.size(), channels, "group_norm grad_gamma");
  check_optional_size(grad_beta.size(), channels, "group_norm grad_beta");
  const std::size_t per_group = channels / groups;
  const std::size_t count = per_group * length;
#pragma omp parallel for schedule(static)
  for (std::size_t g = 0; g < groups; ++g) {
    const T* x = input.data() + g * count;
    const T* dy = grad_output.data() + g * count;
    const auto [mean, var] = moments(x, count);
    const double rstd = 1.0 / std::sqrt(var + kNormEpsilon);
    double sum_dxhat = 0.0;
    double sum_dxhat_xhat = 0.0;
    for (std::size_t c = 0; c < per_group; ++c) {
      const std::size_t ch = g * per_group + c;
      double dgamma = 0.0;
      double dbeta = 0.0;
      for (std::size_t t = 0; t < length; ++t) {
        const std::size_t i = c * length + t;
        const double xhat = (x[i] - mean) * rstd;
        dgamma += dy[i] * xhat;
        dbeta += dy[i];
        const double dxhat = static_cast<double>(dy[i]) * gamma[ch];
        sum_dxhat += dxhat;
        sum_dxhat_xhat += dxhat * xhat;
      }
      if (!grad_gamma.empty()) grad_gamma[ch] += static_cast<T>(dgamma);
      if (!grad_beta.empty()) grad_beta[ch] += static_cast<T>(dbeta);
    }
    if (grad_input.empty()) continue;
    const double mean_dxhat = sum_dxhat / static_cast<double>(count);
    const double mean_dxhat_xhat = sum_dxhat_xhat / static_cast<double>(count);
    T* dx = grad_input.data() + g * count;
    for (std::size_t c = 0; c < per_group; ++c) {
      const std::size_t ch = g * per_group + c;
      for (std::size_t t = 0; t < length; ++t) {
        const std::size_t i = c * length + t;
        const double xhat = (x[i] - mean) * rstd;
        const double dxhat = static_cast<double>(dy[i]) * gamma[ch];
        dx[i] += static_cast<T>(rstd * (dxhat - mean_dxhat - xhat * mean_dxhat_xhat));
      }
    }
  }
}

template <typename T>
void layer_norm_forward(std::size_t channels, std::size_t length,
                        std::span<const T> input, std::span<const T> gamma,
                        std::span<const T> beta, std::span<T> output) {
  if (channels == 0) fail(ErrorKind::kShape, "layer_norm: channels must be positive");
  check_size(input.size(), channels * length, "layer_norm input");
  check_size(gamma.size(), channels, "layer_norm gamma");
  check_size(beta.size(), channels, "layer_norm beta");
  check_size(output.size(), channels * length, "layer_norm output");
#pragma omp parallel for schedule(static)
  for (std::size_t t = 0; t < length; ++t) {
    double sum = 0.0;
    for (std::size_t c = 0; c < channels; ++c) sum += input[c * length + t];
    const double mean = sum / static_cast<double>(channels);
    double sq = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const double d = input[c * length + t] - mean;
      sq += d * d;
    }
    const T m = static_cast<T>(mean);
    const T rstd =
        static_cast<T>(1.0 / std::sqrt(sq / static_cast<double>(channels) + kNormEpsilon));
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t i = c * length + t;
      output[i] = (input[i] - m) * rstd * gamma[c] + beta[c];
    }
  }
}

template <typename T>
void layer_norm_backward(std::size_t channels, std::size_t length,
                         std::span<const T> input, std::span<const T> gamma,
                         std::span<const T> grad_output, std::span<T> grad_input,
                         std::span<T> grad_gamma, std::span<T> grad_beta) {
  if (channels == 0) fail(ErrorKind::kShape, "layer_norm: channels must be positive");
  check_size(input.size(), channels * length, "layer_norm input");
  check_size(grad_output.size(), channels * length, "layer_norm grad_output");
  check_optional_size(grad_input.size(), channels * length, "layer_norm grad_input");
  check_optional_size(grad_gamma.size(), channels, "layer_norm grad_gamma");
  check_optional_size(grad_beta.size(), channels, "layer_norm grad_beta");
  std::vector<double> means(length);
  std::vector<double> rstds(length);
#pragma omp parallel for schedule(static)
  for (std::size_t t = 0; t < length; ++t) {
    double sum = 0.0;
    for (std::size_t c = 0; c < channels; ++c) sum += input[c * length + t];
    const double mean = sum / static_cast<double>(channels);
    double sq = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const double d = input[c * length + t] - mean;
      sq += d * d;
    }
    means[t] = mean;
    rstds[t] = 1.0 / std::sqrt(sq / static_cast<double>(channels) + kNormEpsilon);
  }
  if (!grad_gamma.empty() || !grad_beta.empty()) {
#pragma omp parallel for schedule(static)
    for (std::size_t c = 0; c < channels; ++c) {
      double dgamma = 0.0;
      double dbeta = 0.0;
      for (std::size_t t = 0; t < length; ++t) {
        const std::size_t i = c * length + t;
        dgamma += grad_output[i] * (input[i] - means[t]) * rstds[t];
        dbeta += grad_output[i];
      }
      if (!grad_gamma.empty()) grad_gamma[c] += static_cast<T>(dgamma);
      if (!grad_beta.empty()) grad_beta[c] += static_cast<T>(dbeta);
    }
  }
  if (grad_input.empty()) return;
#pragma omp parallel for schedule(static)
  for (std::size_t t = 0; t < length; ++t) {
    double sum_dxhat = 0.0;
    double sum_dxhat_xhat = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t i = c * length + t;
      const double xhat = (input[i] - means[t]) * rstds[t];
      const double dxhat = static_cast<double>(grad_output[i]) * gamma[c];
      sum_dxhat += dxhat;
      sum_dxhat_xhat += dxhat * xhat;
    }
    const double n = static_cast<double>(channels);
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t i = c * length + t;
      const double xhat = (input[i] - means[t]) * rstds[t];
      const double dxhat = static_cast<double>(grad_output[i]) * gamma[c];
      grad_input[i] +=
          static_cast<T>(rstds[t] * (dxhat - sum_dxhat / n - xhat * sum_dxhat_xhat / n));
    }
  }
}

template <typename T>
void gelu_forward(std::span<const T> input, std::span<T> output) {
  check_size(output.size(), input.size(), "gelu output");
  const std::size_t n = input.size();
  const std::size_t chunks = (n + kElementwiseChunk - 1) / kElementwiseChunk;
#pragma omp parallel for schedule(static)
  for (std::size_t c = 0; c < chunks; ++c) {
    const std::size_t begin = c * kElementwiseChunk;
    const std::size_t count = std::min(kElementwiseChunk, n - begin);
    auto& x = aligned_scratch<T>(0);
    auto& y = aligned_scratch<T>(1);
    x = ConstArrayMap<T>(input.data() + begin, static_cast<Eigen::Index>(count));
    y = T(0.5) * x * (T(1) + (x * T(M_SQRT1_2)).erf());
    std::copy(y.data(), y.data() + count, output.data() + begin);
  }
}

template <typename T>
void gelu_backward(std::span<const T> input, std::span<const T> grad_output,
                   std::span<T> grad_input) {
  check_size(grad_output.size(), input.size(), "gelu grad_output");
  check_size(grad_input.size(), input.size(), "gelu grad_input");
  const std::size_t n = input.size();
  const std::size_t chunks = (n + kElementwiseChunk - 1) / kElementwiseChunk;
  const T inv_sqrt_2pi = T(0.3989422804014327);
#pragma omp parallel for schedule(static)
  for (std::size_t c = 0; c < chunks; ++c) {
    const std::size_t begin = c * kElementwiseChunk;
    const std::size_t count = std::min(kElementwiseChunk, n - begin);
    const auto len = static_cast<Eigen::Index>(count);
    auto& x = aligned_scratch<T>(0);
    auto& dy = aligned_scratch<T>(1);
    auto& dx = aligned_scratch<T>(2);
    x = ConstArrayMap<T>(input.data() + begin, len);
    dy = ConstArrayMap<T>(grad_output.data() + begin, len);
    const auto cdf = T(0.5) * (T(1) + (x * T(M_SQRT1_2)).erf());
    const auto pdf = inv_sqrt_2pi * (T(-0.5) * x.square()).exp();
    dx = dy * (cdf + x * pdf);
    T* out = grad_input.data() + begin;
    for (std::size_t i = 0; i < count; ++i) out[i] += dx[static_cast<Eigen::Index>(i)];
  }
}

template <typename T>
void tanh_forward(std::span<const T> input, std::span<T> output) {
  check_size(output.size(), input.size(), "tanh output");
  const std::size_t n = input.size();
  for (std::size_t begin = 0; begin < n; begin += kElementwiseChunk) {
    const std::size_t count = std::min(kElementwiseChunk, n - begin);
    auto& x = aligned_scratch<T>(0);
    auto& y = aligned_scratch<T>(1);
    x = ConstArrayMap<T>(input.data() + begin, static_cast<Eigen::Index>(count));
    y = x.tanh();
    std::copy(y.data(), y.data() + count, output.data() + begin);
  }
}

template <typename T>
void tanh_backward(std::span<const T> output, std::span<const T> grad_output,
                   std::span<T> grad_input) {
  check_size(grad_output.size(), output.size(), "tanh grad_output");
  check_size(grad_input.size(), output.size(), "tanh grad_input");
  for (std::size_t i = 0; i < output.size(); ++i) {
    grad_input[i] += grad_output[i] * (T(1) - output[i] * output[i]);
  }
}

template <typename T>
double mean_row_sq_dist(std::size_t rows, std::size_t cols, std::span<const T> a,
                        std::span<const T> b) {
  if (rows == 0) fail(ErrorKind::kShape, "row distance needs at least one row");
  check_size(a.size(), rows * cols, "row distance lhs");
  check_size(b.size(), rows * cols, "row distance rhs");
  double total = 0.0;
  for (std::size_t i = 0; i < rows * cols; ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    total += d * d;
  }
  return total / static_cast<double>(rows);
}

template <typename T>
void mean_row_sq_dist_backward(std::size_t rows, std::size_t cols,
                               std::span<const T> a, std::span<const T> b, T scale,
                               std::span<T> grad_a, std::span<T> grad_b) {
  check_size(a.size(), rows * cols, "row distance lhs");
  check_size(b.size(), rows * cols, "row distance rhs");
  check_optional_size(grad_a.size(), rows * cols, "row distance grad lhs");
  check_optional_size(grad_b.size(), rows * cols, "row distance grad rhs");
  const double k = 2.0 * static_cast<double>(scale) / static_cast<double>(rows);
  for (std::size_t i = 0; i < rows * cols; ++i) {
    const T g = static_cast<T>(k * (static_cast<double>(a[i]) - static_cast<double>(b[i])));
    if (!grad_a.empty()) grad_a[i] += g;
    if (!grad_b.empty()) grad_b[i] -= g;
  }
}

template <typename T>
double mean_velocity_sq_dist(std::size_t rows, std::size_t cols, std::span<const T> a,
                             std::span<const T> b) {
  if (rows < 2) fail(ErrorKind::kShape, "velocity distance needs at least two rows");
  check_size(a.size(), rows * cols, "velocity distance lhs");
  check_size(b.size(), rows * cols, "velocity distance rhs");
  double total = 0.0;
  for (std::size_t t = 1; t < rows; ++t) {
    for (std::size_t j = 0; j < cols; ++j) {
      const std::size_t i = t * cols + j;
      const double va = static_cast<double>(a[i]) - static_cast<double>(a[i - cols]);
      const double vb = static_cast<double>(b[i]) - static_cast<double>(b[i - cols]);
      const double d = va - vb;
      total += d * d;
    }
  }
  return total / static_cast<double>(rows - 1);
}

template <typename T>
void mean_velocity_sq_dist_backward(std::size_t rows, std::size_t cols,
                                    std::span<const T> a, std::span<const T> b,
                                    T scale, std::span<T> grad_a, std::span<T> grad_b) {
  if (rows < 2) fail(ErrorKind::kShape, "velocity distance needs at least two rows");
  check_size(a.size(), rows * cols, "velocity distance lhs");
  check_size(b.size(), rows * cols, "velocity distance rhs");
  check_optional_size(grad_a.size(), rows * cols, "velocity distance grad lhs");
  check_optional_size(grad_b.size(), rows * cols, "velocity distance grad rhs");
  const double k = 2.0 * static_cast<double>(scale) / static_cast<double>(rows - 1);
  for (std::size_t t = 1; t < rows; ++t) {
    for (std::size_t j = 0; j < cols; ++j) {
      const std::size_t i = t * cols + j;
      const double va = static_cast<double>(a[i]) - static_cast<double>(a[i - cols]);
      const double vb = static_cast<double>(b[i]) - static_cast<double>(b[i - cols]);
      const T g = static_cast<T>(k * (va - vb));
      if (!grad_a.empty()) {
        grad_a[i] += g;
        grad_a[i - cols] -= g;
      }
      if (!grad_b.empty()) {
        grad_b[i] -= g;
        grad_b[i - cols] += g;
      }
    }
  }
}

#define RIGDISTILL_INSTANTIATE(T)                                                        \
  template void conv1d_forward<T>(const ConvShape&, std::span<const T>,                 \
                                  std::span<const T>, std::span<const T>, std::span<T>); \
  template void conv1d_backward<T>(const ConvShape&, std::span<const T>,                \
                                   std::span<const T>, std::span<const T>,              \
                                   std::span<T>, std::span<T>, std::span<T>);           \
  template void group_norm_forward<T>(std::size_t, std::size_t, std::size_t,            \
                                      std::span<const T>, std::span<const T>,           \
                                      std::span<const T>, std::span<T>);                \
  template void group_norm_backward<T>(std::size_t, std::size_t, std::size_t,           \
                                       std::span<const T>, std::span<const T>,          \
                                       std::span<const T>, std::span<T>, std::span<T>,  \
                                       std::span<T>);                                   \
  template void layer_norm_forward<T>(std::size_t, std::size_t, std::span<const T>,     \
                                      std::span<const T>, std::span<const T>,           \
                                      std::span<T>);                                    \
  template void layer_norm_backward<T>(std::size_t, std::size_t, std::span<const T>,    \
                                       std::span<const T>, std::span<const T>,          \
                                       std::span<T>, std::span<T>, std::span<T>);       \
  template void gelu_forward<T>(std::span<const T>, std::span<T>);                      \
  template void gelu_backward<T>(std::span<const T>, std::span<const T>, std::span<T>); \
  template void tanh_forward<T>(std::span<const T>, std::span<T>);                      \
  template void tanh_backward<T>(std::span<const T>, std::span<const T>, std::span<T>); \
  template double mean_row_sq_dist<T>(std::size_t, std::size_t, std::span<const T>,     \
                                      std::span<const T>);                              \
  template void mean_row_sq_dist_backward<T>(std::size_t, std::size_t,                  \
                                             std::span<const T>, std::span<const T>, T, \
                                             std::span<T>, std::span<T>);               \
  template double mean_velocity_sq_dist<T>(std::size_t, std::size_t,                    \
                                           std::span<const T>, std::span<const T>);     \
  template void mean_velocity_sq_dist_backward<T>(std::size_t, std::size_t,             \
                                                  std::span<const T>,                   \
                                                  std::span<const T>, T, std::span<T>,  \
                                                  std::span<T>);

RIGDISTILL_INSTANTIATE(float)
RIGDISTILL_INSTANTIATE(double)

#undef RIGDISTILL_INSTANTIATE

}  // namespace rigdistill::kernels
