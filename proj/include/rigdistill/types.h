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

#ifndef RIGDISTILL_TYPES_H_
#define RIGDISTILL_TYPES_H_

#include <array>
#include <cstddef>
#include <string>
#include <vector>

namespace rigdistill {

inline constexpr std::size_t kRigDims = 78;
inline constexpr std::size_t kSampleRate = 16000;
inline constexpr std::size_t kFrameRate = 30;
inline constexpr std::size_t kWindowSamples = 8192;
inline constexpr int kWindowMs = 512;
inline constexpr std::size_t kSamplesPerMs = kSampleRate / 1000;
inline constexpr std::size_t kHiddenWidth = 150;

using RigFrame = std::array<float, kRigDims>;
using RigSequence = std::vector<RigFrame>;

struct PhonemeInterval {
  double start_s = 0.0;
  double end_s = 0.0;
  std::string label;
};

}  // namespace rigdistill

#endif  // RIGDISTILL_TYPES_H_
