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

#ifndef RIGDISTILL_GRADCHECK_H_
#define RIGDISTILL_GRADCHECK_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rigdistill/graph.h"

namespace rigdistill {

struct GradCheckConfig {
  std::uint64_t seed = 0;
  std::size_t seeds = 100;
  // Upper bound on the element count of any random input.
  std::size_t max_size = 32;
  // Base step; the oracle extrapolates from h and h/2.
  double step = 1e-3;
  double tolerance = 1e-4;
  bool network = true;
  std::size_t network_channels = 16;
  std::size_t network_seeds = 100;
  std::size_t network_coords = 8;  // sampled parameter coordinates per seed
  // Negative control; the named op's backward is perturbed.
  std::optional<OpKind> corrupt;
};

struct GradCheckEntry {
  std::string name;
  std::size_t cases = 0;
  std::size_t coordinates = 0;
  double max_rel_error = 0.0;
  bool passed = true;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double tolerance = 0.0;

  bool passed() const;
  // One line per entry plus a summary line; stable for a fixed config.
  std::string to_text() const;
};

// |a - n| / max(|a|, |n|, floor); the floor keeps vanishing gradients from
// turning roundoff into large ratios.
double gradient_rel_error(double analytic, double numeric);
inline constexpr double kGradErrorFloor = 1e-2;

GradCheckReport run_gradcheck(const GradCheckConfig& config);

}  // namespace rigdistill

#endif  // RIGDISTILL_GRADCHECK_H_
