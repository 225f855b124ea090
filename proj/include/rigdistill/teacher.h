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

#ifndef RIGDISTILL_TEACHER_H_
#define RIGDISTILL_TEACHER_H_

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "rigdistill/audio.h"
#include "rigdistill/types.h"

namespace rigdistill {

// Stand-in teacher: mel-spaced log band energies of the 512 ms window around
// each frame (4 sub-windows x 8 bands), a fixed seeded affine map to 78
// values, tanh, then exponential smoothing over frames.
class SyntheticTeacher {
 public:
  static constexpr std::size_t kBands = 8;
  static constexpr std::size_t kSubWindows = 4;
  static constexpr std::size_t kFeatures = kBands * kSubWindows;
  static constexpr double kSmoothing = 0.6;
  static constexpr int kFutureMs = 256;

  explicit SyntheticTeacher(std::uint64_t seed = 0);

  std::uint64_t seed() const { return seed_; }

  std::array<double, kFeatures> features(std::span<const float> window) const;
  // Unsmoothed label of one frame.
  RigFrame raw_frame(const AudioTrack& track, std::size_t frame_index) const;
  // s_0 = raw_0, s_k = 0.6 s_{k-1} + 0.4 raw_k, for every frame of the track.
  RigSequence label_track(const AudioTrack& track) const;
  // Smoothed label of a single frame.
  RigFrame label(const AudioTrack& track, std::size_t frame_index) const;

 private:
  std::uint64_t seed_;
  std::vector<double> weight_;  // 78 x 32
  std::vector<double> bias_;    // 78
  std::array<std::size_t, kBands + 1> band_edges_{};  // FFT bins
};

struct LabeledTrack {
  std::string path;  // relative to the corpus directory
  RigSequence frames;
  std::string provenance;
  std::shared_ptr<const AudioTrack> audio;  // null until attached
};

struct PseudoLabelDataset {
  std::vector<LabeledTrack> items;

  // Values in [-1, 1]; lengths match the audio when attached.
  void validate() const;
};

struct NamedTrack {
  std::string path;
  std::shared_ptr<const AudioTrack> audio;
};

// Every *.wav directly inside dir, sorted by file name.
std::vector<NamedTrack> load_corpus(const std::string& dir);

PseudoLabelDataset generate_dataset(const std::vector<NamedTrack>& tracks,
                                    const SyntheticTeacher& teacher);

// Loads the audio of every item from dir/path and checks frame counts.
void attach_audio(PseudoLabelDataset& dataset, const std::string& dir);

inline constexpr std::uint32_t kLabelVersion = 1;

std::vector<std::uint8_t> encode_labels(const PseudoLabelDataset& dataset);
PseudoLabelDataset decode_labels(const std::vector<std::uint8_t>& bytes,
                                 const std::string& origin = "labels");
void save_labels(const PseudoLabelDataset& dataset, const std::string& path);
PseudoLabelDataset load_labels(const std::string& path);

}  // namespace rigdistill

#endif  // RIGDISTILL_TEACHER_H_
