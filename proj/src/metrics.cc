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

#include "rigdistill/metrics.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <json.hpp>

#include "binary_io.h"
#include "rigdistill/audio.h"
#include "rigdistill/error.h"

namespace rigdistill {
namespace {

using nlohmann::json;

AffineMap parse_map(const json& j, const std::string& which) {
  if (!j.is_object() || !j.contains("matrix") || !j.contains("offset")) {
    fail(ErrorKind::kMalformed, "lip geometry: '" + which + "' needs matrix and offset");
  }
  const json& m = j.at("matrix");
  const json& o = j.at("offset");
  if (!m.is_array() || m.size() != 3 || !o.is_array() || o.size() != 3) {
    fail(ErrorKind::kMalformed, "lip geometry: '" + which + "' needs a 3 x 78 matrix and 3 offsets");
  }
  AffineMap map;
  for (std::size_t r = 0; r < 3; ++r) {
    if (!m[r].is_array() || m[r].size() != kRigDims) {
      fail(ErrorKind::kMalformed, "lip geometry: '" + which + "' matrix row " +
                                      std::to_string(r) + " needs 78 values");
    }
    for (std::size_t c = 0; c < kRigDims; ++c) {
      if (!m[r][c].is_number()) fail(ErrorKind::kMalformed, "lip geometry: non-numeric entry");
      map.matrix[r][c] = m[r][c].get<double>();
    }
    if (!o[r].is_number()) fail(ErrorKind::kMalformed, "lip geometry: non-numeric offset");
    map.offset[r] = o[r].get<double>();
  }
  return map;
}

json map_json(const AffineMap& map) {
  json m = json::array();
  for (const auto& row : map.matrix) m.push_back(row);
  return json{{"matrix", m}, {"offset", map.offset}};
}

}  // namespace

std::array<double, 3> AffineMap::apply(const RigFrame& rig) const {
  std::array<double, 3> out = offset;
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t c = 0; c < kRigDims; ++c) out[r] += matrix[r][c] * rig[c];
  }
  return out;
}

void LipGeometry::validate() const {
  for (const AffineMap* map : {&upper, &lower}) {
    for (const auto& row : map->matrix) {
      for (double v : row) {
        if (!std::isfinite(v)) fail(ErrorKind::kNonFinite, "lip geometry has a non-finite coefficient");
      }
    }
    for (double v : map->offset) {
      if (!std::isfinite(v)) fail(ErrorKind::kNonFinite, "lip geometry has a non-finite offset");
    }
  }
}

LipGeometry parse_lip_geometry(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::kMalformed, std::string("lip geometry: ") + e.what());
  }
  if (!j.is_object() || !j.contains("upper") || !j.contains("lower")) {
    fail(ErrorKind::kMalformed, "lip geometry needs 'upper' and 'lower'");
  }
  LipGeometry g;
  g.upper = parse_map(j.at("upper"), "upper");
  g.lower = parse_map(j.at("lower"), "lower");
  g.validate();
  return g;
}

LipGeometry load_lip_geometry(const std::string& path) {
  const auto bytes = io::read_file(path);
  return parse_lip_geometry(std::string(bytes.begin(), bytes.end()));
}

std::string lip_geometry_json(const LipGeometry& geometry) {
  return json{{"upper", map_json(geometry.upper)}, {"lower", map_json(geometry.lower)}}.dump(1);
}

void save_lip_geometry(const LipGeometry& geometry, const std::string& path) {
  const std::string text = lip_geometry_json(geometry) + "\n";
  io::write_file(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

LipGeometry synthetic_lip_geometry(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> coef(0.0, 0.05);
  LipGeometry g;
  g.upper.offset = {0.0, 0.1, 0.0};
  g.lower.offset = {0.0, -0.1, 0.0};
  for (std::size_t c = 0; c < kRigDims; ++c) {
    g.upper.matrix[0][c] = coef(rng) * 0.2;
    g.lower.matrix[0][c] = coef(rng) * 0.2;
    g.upper.matrix[2][c] = coef(rng) * 0.2;
    g.lower.matrix[2][c] = coef(rng) * 0.2;
  }
  // a handful of controls open the mouth
  for (std::size_t c = 0; c < 6; ++c) {
    g.upper.matrix[1][c] = 0.05 + std::abs(coef(rng));
    g.lower.matrix[1][c] = -0.05 - std::abs(coef(rng));
  }
  return g;
}

PhonemeIntervals parse_intervals(const std::string& text) {
  PhonemeIntervals out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    PhonemeInterval iv;
    if (!(fields >> iv.start_s >> iv.end_s >> iv.label)) {
      fail(ErrorKind::kMalformed, "intervals line " + std::to_string(line_no) +
                                      ": expected start, end and label");
    }
    if (!std::isfinite(iv.start_s) || !std::isfinite(iv.end_s) || !(iv.start_s < iv.end_s)) {
      fail(ErrorKind::kMalformed, "intervals line " + std::to_string(line_no) +
                                      ": start must be before end");
    }
    out.push_back(std::move(iv));
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.start_s < b.start_s;
  });
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (out[i].start_s < out[i - 1].end_s) {
      fail(ErrorKind::kMalformed, "intervals overlap at " + std::to_string(out[i].start_s) + " s");
    }
  }
  return out;
}

PhonemeIntervals load_intervals(const std::string& path) {
  const auto bytes = io::read_file(path);
  return parse_intervals(std::string(bytes.begin(), bytes.end()));
}

std::string format_intervals(const PhonemeIntervals& intervals) {
  std::ostringstream os;
  os.precision(9);
  for (const auto& iv : intervals) os << iv.start_s << '\t' << iv.end_s << '\t' << iv.label << '\n';
  return os.str();
}

void save_intervals(const PhonemeIntervals& intervals, const std::string& path) {
  const std::string text = format_intervals(intervals);
  io::write_file(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

bool is_bilabial(const std::string& label) {
  std::string core = label;
  if (core.size() >= 2 && core.front() == '/' && core.back() == '/') {
    core = core.substr(1, core.size() - 2);
  }
  return core == "p" || core == "b" || core == "m";
}

double rig_mse(const RigSequence& pred, const RigSequence& ref) {
  if (pred.size() != ref.size()) {
    fail(ErrorKind::kShape, "rig_mse: " + std::to_string(pred.size()) + " vs " +
                                std::to_string(ref.size()) + " frames");
  }
  if (pred.empty()) fail(ErrorKind::kEmptyInput, "rig_mse of empty sequences");
  double acc = 0.0;
  for (std::size_t t = 0; t < pred.size(); ++t) {
    for (std::size_t i = 0; i < kRigDims; ++i) {
      const double d = static_cast<double>(pred[t][i]) - ref[t][i];
      acc += d * d;
    }
  }
  return acc / static_cast<double>(pred.size() * kRigDims);
}

double lip_distance(const RigFrame& rig, const LipGeometry& geometry) {
  return geometry.upper.apply(rig)[1] - geometry.lower.apply(rig)[1];
}

PbmCount pbm_count(const RigSequence& frames, const PhonemeIntervals& intervals,
                   const LipGeometry& geometry, double threshold, std::size_t tolerance_frames) {
  std::vector<double> dist(frames.size());
  for (std::size_t k = 0; k < frames.size(); ++k) dist[k] = lip_distance(frames[k], geometry);
  std::size_t total = 0;
  std::size_t hits = 0;
  for (std::size_t k = 0; k < frames.size(); ++k) {
    const double t = static_cast<double>(frame_center(static_cast<std::int64_t>(k))) / kSampleRate;
    const bool pbm = std::any_of(intervals.begin(), intervals.end(), [&](const auto& iv) {
      return is_bilabial(iv.label) && iv.start_s <= t && t < iv.end_s;
    });
    if (!pbm) continue;
    ++total;
    const std::size_t lo = k >= tolerance_frames ? k - tolerance_frames : 0;
    const std::size_t hi = std::min(frames.size() - 1, k + tolerance_frames);
    const double best = *std::min_element(dist.begin() + lo, dist.begin() + hi + 1);
    if (best < threshold) ++hits;
  }
  return {hits, total};
}

double pbm_accuracy(const RigSequence& frames, const PhonemeIntervals& intervals,
                    const LipGeometry& geometry, double threshold,
                    std::size_t tolerance_frames) {
  const PbmCount c = pbm_count(frames, intervals, geometry, threshold, tolerance_frames);
  if (c.frames == 0) fail(ErrorKind::kNoPbmFrames, "no frame centre falls inside a p/b/m interval");
  return 100.0 * static_cast<double>(c.hits) / static_cast<double>(c.frames);
}

double jitter(const RigSequence& frames, const LipGeometry& geometry) {
  if (frames.size() < 3) {
    fail(ErrorKind::kInvalidArgument, "jitter needs at least 3 frames, got " +
                                          std::to_string(frames.size()));
  }
  // the offset cancels, so take second differences in rig space first
  const auto& lin = geometry.lower.matrix;
  double acc = 0.0;
  for (std::size_t t = 2; t < frames.size(); ++t) {
    std::array<double, kRigDims> d2;
    for (std::size_t c = 0; c < kRigDims; ++c) {
      d2[c] = static_cast<double>(frames[t][c]) - 2.0 * frames[t - 1][c] + frames[t - 2][c];
    }
    for (std::size_t a = 0; a < 3; ++a) {
      double v = 0.0;
      for (std::size_t c = 0; c < kRigDims; ++c) v += lin[a][c] * d2[c];
      acc += v * v;
    }
  }
  return acc / static_cast<double>(frames.size() - 2);
}

}  // namespace rigdistill
