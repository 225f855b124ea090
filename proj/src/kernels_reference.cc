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

#include <cmath>
#include <cstddef>
#include <span>

#include "rigdistill/error.h"
#include "rigdistill/kernels.h"

namespace rigdistill::kernels::reference {

namespace {

// Value of input channel ci at padded coordinate p, zero in the padding.
template <typename T>
T padded_at(const ConvShape& s, std::span<const T> input, std::size_t ci, std::size_t p) {
  if (p < s.pad_left || p >= s.pad_left + s.in_length) return T(0);
  return input[ci * s.in_length + (p - s.pad_left)];
}

}  // namespace

template <typename T>
void conv1d_forward(const ConvShape& s, std::span<const T> input,
                    std::span<const T> weight, std::span<const T> bias,
                    std::span<T> output) {
  s.validate();
  if (input.size() != s.input_size() || weight.size() != s.weight_size() ||
      output.size() != s.output_size() || (!bias.empty() && bias.size() != s.out_channels)) {
    fail(ErrorKind::kShape, "reference conv1d: buffer sizes do not match shape");
  }
  const std::size_t cin = s.in_per_group();
  const std::size_t cout = s.out_per_group();
  const std::size_t len = s.out_length();
  for (std::size_t co = 0; co < s.out_channels; ++co) {
    const std::size_t g = co / cout;
    for (std::size_t t = 0; t < len; ++t) {
      T acc = T(0);
      for (std::size_t c = 0; c < cin; ++c) {
        for (std::size_t j = 0; j < s.kernel; ++j) {
          acc += weight[(co * cin + c) * s.kernel + j] *
                 padded_at(s, input, g * cin + c, t * s.stride + j);
        }
      }
      output[co * len + t] = acc + (bias.empty() ? T(0) : bias[co]);
    }
  }
}

template <typename T>
void conv1d_backward(const ConvShape& s, std::span<const T> input,
                     std::span<const T> weight, std::span<const T> grad_output,
                     std::span<T> grad_input, std::span<T> grad_weight,
                     std::span<T> grad_bias) {
  s.validate();
  const std::size_t cin = s.in_per_group();
  const std::size_t cout = s.out_per_group();
  const std::size_t len = s.out_length();
  for (std::size_t co = 0; co < s.out_channels; ++co) {
    const std::size_t g = co / cout;
    for (std::size_t t = 0; t < len; ++t) {
      const T dy = grad_output[co * len + t];
      if (!grad_bias.empty()) grad_bias[co] += dy;
      for (std::size_t c = 0; c < cin; ++c) {
        const std::size_t ci = g * cin + c;
        for (std::size_t j = 0; j < s.kernel; ++j) {
          const std::size_t w = (co * cin + c) * s.kernel + j;
          const std::size_t p = t * s.stride + j;
          if (!grad_weight.empty()) grad_weight[w] += dy * padded_at(s, input, ci, p);
          if (!grad_input.empty() && p >= s.pad_left && p < s.pad_left + s.in_length) {
            grad_input[ci * s.in_length + (p - s.pad_left)] += dy * weight[w];
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
    fail(ErrorKind::kShape, "reference group_norm: channels not divisible by groups");
  }
  const std::size_t per = channels / groups;
  for (std::size_t g = 0; g < groups; ++g) {
    double mean = 0.0;
    for (std::size_t c = g * per; c < (g + 1) * per; ++c)
      for (std::size_t t = 0; t < length; ++t) mean += input[c * length + t];
    mean /= static_cast<double>(per * length);
    double var = 0.0;
    for (std::size_t c = g * per; c < (g + 1) * per; ++c)
      for (std::size_t t = 0; t < length; ++t) {
        const double d = input[c * length + t] - mean;
        var += d * d;
      }
    var /= static_cast<double>(per * length);
    for (std::size_t c = g * per; c < (g + 1) * per; ++c)
      for (std::size_t t = 0; t < length; ++t) {
        const double xhat = (input[c * length + t] - mean) / std::sqrt(var + kNormEpsilon);
        output[c * length + t] = static_cast<T>(xhat * gamma[c] + beta[c]);
      }
  }
}

template <typename T>
void layer_norm_forward(std::size_t channels, std::size_t length,
                        std::span<const T> input, std::span<const T> gamma,
                        std::span<const T> beta, std::span<T> output) {
  for (std::size_t t = 0; t < length; ++t) {
    double mean = 0.0;
    for (std::size_t c = 0; c < channels; ++c) mean += input[c * length + t];
    mean /= static_cast<double>(channels);
    double var = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const double d = input[c * length + t] - mean;
      var += d * d;
    }
    var /= static_cast<double>(channels);
    for (std::size_t c = 0; c < channels; ++c) {
      const double xhat = (input[c * length + t] - mean) / std::sqrt(var + kNormEpsilon);
      output[c * length + t] = static_cast<T>(xhat * gamma[c] + beta[c]);
    }
  }
}

template <typename T>
void gelu_forward(std::span<const T> input, std::span<T> output) {
  for (std::size_t i = 0; i < input.size(); ++i) {
    const double x = input[i];
    output[i] = static_cast<T>(0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))));
  }
}

#define RIGDISTILL_INSTANTIATE(T)                                                         \
  template void conv1d_forward<T>(const ConvShape&, std::span<const T>,                  \
                                  std::span<const T>, std::span<const T>, std::span<T>);  \
  template void conv1d_backward<T>(const ConvShape&, std::span<const T>,                 \
                                   std::span<const T>, std::span<const T>, std::span<T>, \
                                   std::span<T>, std::span<T>);                          \
  template void group_norm_forward<T>(std::size_t, std::size_t, std::size_t,             \
                                      std::span<const T>, std::span<const T>,            \
                                      std::span<const T>, std::span<T>);                 \
  template void layer_norm_forward<T>(std::size_t, std::size_t, std::span<const T>,      \
                                      std::span<const T>, std::span<const T>,            \
                                      std::span<T>);                                     \
  template void gelu_forward<T>(std::span<const T>, std::span<T>);

RIGDISTILL_INSTANTIATE(float)
RIGDISTILL_INSTANTIATE(double)

#undef RIGDISTILL_INSTANTIATE

}  // namespace rigdistill::kernels::reference
