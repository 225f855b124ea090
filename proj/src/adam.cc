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

#include "rigdistill/adam.h"

#include <cmath>
#include <string>

#include "rigdistill/error.h"

namespace rigdistill {

template <typename T>
Adam<T>::Adam(AdamConfig config) : config_(config) {
  if (!(config_.learning_rate >= 0.0) || !std::isfinite(config_.learning_rate)) {
    fail(ErrorKind::kInvalidArgument, "adam: learning rate must be finite and >= 0");
  }
  if (!(config_.beta1 >= 0.0 && config_.beta1 < 1.0) ||
      !(config_.beta2 >= 0.0 && config_.beta2 < 1.0)) {
    fail(ErrorKind::kInvalidArgument, "adam: betas must lie in [0, 1)");
  }
  if (!(config_.epsilon > 0.0)) fail(ErrorKind::kInvalidArgument, "adam: epsilon must be > 0");
}

template <typename T>
void Adam<T>::step(ParameterStore<T>& params) {
  if (steps_ == 0 && m_.empty()) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_.emplace_back(params.value(i).shape());
      v_.emplace_back(params.value(i).shape());
    }
  }
  if (m_.size() != params.size()) {
    fail(ErrorKind::kShape, "adam: parameter count changed from " + std::to_string(m_.size()) +
                                " to " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params.value(i).shape() != m_[i].shape() || params.grad(i).shape() != m_[i].shape()) {
      fail(ErrorKind::kShape, "adam: shape mismatch for parameter " + params.name(i));
    }
  }
  ++steps_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto theta = params.value(i).data();
    auto g = params.grad(i).data();
    auto m = m_[i].data();
    auto v = v_[i].data();
    for (std::size_t j = 0; j < theta.size(); ++j) {
      const double gj = g[j];
      const double mj = b1 * m[j] + (1.0 - b1) * gj;
      const double vj = b2 * v[j] + (1.0 - b2) * gj * gj;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      const double update =
          config_.learning_rate * (mj / c1) / (std::sqrt(vj / c2) + config_.epsilon);
      theta[j] = static_cast<T>(theta[j] - update);
    }
  }
}

template class Adam<float>;
template class Adam<double>;

}  // namespace rigdistill
