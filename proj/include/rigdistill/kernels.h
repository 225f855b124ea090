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

#ifndef RIGDISTILL_KERNELS_H_
#define RIGDISTILL_KERNELS_H_

// Numeric kernels behind the autodiff ops and the inference path.
//
// The functions in rigdistill::kernels are the production versions: the
// convolution is packed into an 8-row register-blocked GEMM and the outer
// loops are OpenMP-parallel. Every output element is reduced by exactly one
// thread in a fixed order, so results do not depend on the thread count.
//
// rigdistill::kernels::reference holds plain serial loops with the textbook
// definition of each op. They exist for tests and the benchmark only.
//
// Backward kernels accumulate (+=) into their gradient outputs. An empty
// gradient span means "not requested".

#include <cstddef>
#include <span>

namespace rigdistill::kernels {

struct ConvShape {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t in_length = 1;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t pad_left = 0;
  std::size_t pad_right = 0;
  std::size_t groups = 1;

  std::size_t padded_length() const { return in_length + pad_left + pad_right; }
  std::size_t out_length() const { return (padded_length() - kernel) / stride + 1; }
  std::size_t in_per_group() const { return in_channels / groups; }
  std::size_t out_per_group() const { return out_channels / groups; }
  std::size_t weight_size() const { return out_channels * in_per_group() * kernel; }
  std::size_t input_size() const { return in_channels * in_length; }
  std::size_t output_size() const { return out_channels * out_length(); }
  std::size_t macs() const { return out_channels * in_per_group() * kernel * out_length(); }

  // Throws Error(kShape) naming the offending dimension.
  void validate() const;
};

inline constexpr double kNormEpsilon = 1e-5;

// Scratch values the forward conv needs for this shape: packed weight and
// im2col panels for the tiled path, the unfolded input for the direct path,
// one padded row for depthwise.
std::size_t conv1d_workspace(const ConvShape& shape, std::size_t value_bytes);

template <typename T>
void conv1d_forward(const ConvShape& shape, std::span<const T> input,
                    std::span<const T> weight, std::span<const T> bias,
                    std::span<T> output);

template <typename T>
void conv1d_backward(const ConvShape& shape, std::span<const T> input,
                     std::span<const T> weight, std::span<const T> grad_output,
                     std::span<T> grad_input, std::span<T> grad_weight,
                     std::span<T> grad_bias);

// Group norm over channels x length; each group spans channels/groups
// consecutive channels and the whole length. Safe in place.
template <typename T>
void group_norm_forward(std::size_t channels, std::size_t length, std::size_t groups,
                        std::span<const T> input, std::span<const T> gamma,
                        std::span<const T> beta, std::span<T> output);

template <typename T>
void group_norm_backward(std::size_t channels, std::size_t length, std::size_t groups,
                         std::span<const T> input, std::span<const T> gamma,
                         std::span<const T> grad_output, std::span<T> grad_input,
                         std::span<T> grad_gamma, std::span<T> grad_beta);

// Layer norm over the channel axis, independently for every time step.
template <typename T>
void layer_norm_forward(std::size_t channels, std::size_t length,
                        std::span<const T> input, std::span<const T> gamma,
                        std::span<const T> beta, std::span<T> output);

template <typename T>
void layer_norm_backward(std::size_t channels, std::size_t length,
                         std::span<const T> input, std::span<const T> gamma,
                         std::span<const T> grad_output, std::span<T> grad_input,
                         std::span<T> grad_gamma, std::span<T> grad_beta);

// GELU in the exact erf form: x * Phi(x).
template <typename T>
void gelu_forward(std::span<const T> input, std::span<T> output);
template <typename T>
void gelu_backward(std::span<const T> input, std::span<const T> grad_output,
                   std::span<T> grad_input);

template <typename T>
void tanh_forward(std::span<const T> input, std::span<T> output);
// Uses the forward output: d tanh = 1 - y^2.
template <typename T>
void tanh_backward(std::span<const T> output, std::span<const T> grad_output,
                   std::span<T> grad_input);

// Mean over rows of the squared L2 distance between row a_i and b_i.
template <typename T>
double mean_row_sq_dist(std::size_t rows, std::size_t cols, std::span<const T> a,
                        std::span<const T> b);
// d/da of scale * mean_row_sq_dist; d/db is the negation.
template <typename T>
void mean_row_sq_dist_backward(std::size_t rows, std::size_t cols,
                               std::span<const T> a, std::span<const T> b, T scale,
                               std::span<T> grad_a, std::span<T> grad_b);

// Mean over t = 1..rows-1 of |(a_t - a_{t-1}) - (b_t - b_{t-1})|^2.
template <typename T>
double mean_velocity_sq_dist(std::size_t rows, std::size_t cols, std::span<const T> a,
                             std::span<const T> b);
template <typename T>
void mean_velocity_sq_dist_backward(std::size_t rows, std::size_t cols,
                                    std::span<const T> a, std::span<const T> b,
                                    T scale, std::span<T> grad_a, std::span<T> grad_b);

namespace reference {

template <typename T>
void conv1d_forward(const ConvShape& shape, std::span<const T> input,
                    std::span<const T> weight, std::span<const T> bias,
                    std::span<T> output);

template <typename T>
void conv1d_backward(const ConvShape& shape, std::span<const T> input,
                     std::span<const T> weight, std::span<const T> grad_output,
                     std::span<T> grad_input, std::span<T> grad_weight,
                     std::span<T> grad_bias);

template <typename T>
void group_norm_forward(std::size_t channels, std::size_t length, std::size_t groups,
                        std::span<const T> input, std::span<const T> gamma,
                        std::span<const T> beta, std::span<T> output);

template <typename T>
void layer_norm_forward(std::size_t channels, std::size_t length,
                        std::span<const T> input, std::span<const T> gamma,
                        std::span<const T> beta, std::span<T> output);

template <typename T>
void gelu_forward(std::span<const T> input, std::span<T> output);

}  // namespace reference

}  // namespace rigdistill::kernels

#endif  // RIGDISTILL_KERNELS_H_
