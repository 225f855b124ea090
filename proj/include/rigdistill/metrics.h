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

#ifndef RIGDISTILL_METRICS_H_
#define RIGDISTILL_METRICS_H_

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "rigdistill/types.h"

namespace rigdistill {

// y = matrix * rig + offset, with a 3 x 78 matrix.
struct AffineMap {
  std::array<std::array<double, kRigDims>, 3> matrix{};
  std::array<double, 3> offset{};

  std::array<double, 3> apply(const RigFrame& rig) const;
};

// Rig space to two lip vertices: the upper lip and the lower lip midpoint.
struct LipGeometry {
  AffineMap upper;
  AffineMap lower;

  void validate() const;
};

LipGeometry parse_lip_geometry(const std::string& json_text);
LipGeometry load_lip_geometry(const std::string& path);
std::string lip_geometry_json(const LipGeometry& geometry);
void save_lip_geometry(const LipGeometry& geometry, const std::string& path);

// Lips 0.2 apart at rest; a few seeded rig controls move each lip vertically.
LipGeometry synthetic_lip_geometry(std::uint64_t seed);

using PhonemeIntervals = std::vector<PhonemeInterval>;

// Tab separated "start_s end_s label" rows; '#' starts a comment line.
// Sorted by start on return.
PhonemeIntervals parse_intervals(const std::string& text);
PhonemeIntervals load_intervals(const std::string& path);
std::string format_intervals(const PhonemeIntervals& intervals);
void save_intervals(const PhonemeIntervals& intervals, const std::string& path);

// p, b or m, with or without surrounding slashes.
bool is_bilabial(const std::string& label);

double rig_mse(const RigSequence& pred, const RigSequence& ref);

// Vertical gap: y(upper) - y(lower).
double lip_distance(const RigFrame& rig, const LipGeometry& geometry);

inline constexpr double kPbmThreshold = 0.15;
inline constexpr std::size_t kPbmTolerance = 2;

struct PbmCount {
  std::size_t hits = 0;
  std::size_t frames = 0;  // frames whose centre lies in a p/b/m interval
};

PbmCount pbm_count(const RigSequence& frames, const PhonemeIntervals& intervals,
                   const LipGeometry& geometry, double threshold = kPbmThreshold,
                   std::size_t tolerance_frames = kPbmTolerance);

// Percentage of bilabial frames whose minimum lip distance within
// +-tolerance frames is below the threshold.
double pbm_accuracy(const RigSequence& frames, const PhonemeIntervals& intervals,
                    const LipGeometry& geometry, double threshold = kPbmThreshold,
                    std::size_t tolerance_frames = kPbmTolerance);

// Mean squared second difference of the lower lip vertex, t = 2..N-1.
double jitter(const RigSequence& frames, const LipGeometry& geometry);

}  // namespace rigdistill

#endif  // RIGDISTILL_METRICS_H_
