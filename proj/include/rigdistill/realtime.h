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

#ifndef RIGDISTILL_REALTIME_H_
#define RIGDISTILL_REALTIME_H_

#include <array>
#include <atomic>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "rigdistill/audio.h"
#include "rigdistill/student_net.h"
#include "rigdistill/types.h"

namespace rigdistill {

using EnsembleWeights = std::array<double, 3>;

// Throws kInvalidArgument unless every weight is in [0, 1] and they sum to 1.
void validate_ensemble_weights(const EnsembleWeights& alphas);

RigFrame ensemble_combine(const RigFrame& prev, const RigFrame& curr, const RigFrame& next,
                          const EnsembleWeights& alphas);

// Sub-frame grid at 60 fps: round(j * 16000 / 60); even j are the 30 fps
// frame times.
std::int64_t subframe_center(std::int64_t j);

inline constexpr std::size_t kRingCapacity = 16384;
inline constexpr double kSmoothingMs = 16.7;

// Single-producer / single-consumer sample ring with an absolute counter.
// The consumer publishes the oldest index it still needs; the producer only
// overwrites samples below it.
class SampleRing {
 public:
  explicit SampleRing(std::size_t capacity = kRingCapacity);

  // Producer side. Returns how many samples were accepted.
  std::size_t push(std::span<const float> samples);
  std::uint64_t written() const { return written_.load(std::memory_order_acquire); }

  // Consumer side. Indices < 0 or >= written() read as zero; indices below
  // the published floor must not be requested.
  void read(std::int64_t start, std::span<float> out) const;
  void release_before(std::int64_t index);
  std::size_t capacity() const { return buffer_.size(); }

 private:
  std::vector<float> buffer_;
  std::atomic<std::uint64_t> written_{0};
  std::atomic<std::uint64_t> floor_{0};
};

// Ensemble mode predicts on the 60 fps grid, two forwards per frame: frame k
// combines sub-frames 2k-1, 2k and 2k+1, and frame 0 reuses sub-frame 0 as
// its previous one.
struct StreamConfig {
  bool ensemble = false;
  EnsembleWeights alphas{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
};

struct StreamFrame {
  std::uint64_t frame_index = 0;
  RigFrame rig{};
};

class StreamEngine {
 public:
  StreamEngine(const StudentNet& net, StreamConfig config);

  // Producer. first_sample_index, when given, must equal the number of
  // samples pushed so far; a mismatch marks a gap that next_frame reports.
  std::size_t push_audio(std::span<const float> samples,
                         std::optional<std::uint64_t> first_sample_index = std::nullopt);
  // Producer: no more audio; pending frames see zeros past the end.
  void finish();

  // Consumer. Empty when the next frame is not ready yet (or the stream is
  // over); throws kAudioGap after a gap.
  std::optional<StreamFrame> next_frame();
  // True once finish() was called and every frame has been emitted.
  bool done() const;

  std::uint64_t frames_emitted() const { return next_index_; }
  std::uint64_t forward_count() const { return forwards_; }
  const std::vector<double>& inference_ms() const { return timings_; }
  const StreamConfig& config() const { return config_; }
  int future_ms() const { return net_.config().future_ms; }

 private:
  RigFrame predict_at(std::int64_t anchor);

  const StudentNet& net_;
  StreamConfig config_;
  SampleRing ring_;
  std::atomic<bool> finished_{false};
  std::atomic<bool> gap_{false};
  std::atomic<std::uint64_t> pushed_{0};
  std::uint64_t next_index_ = 0;
  std::uint64_t forwards_ = 0;
  std::optional<RigFrame> carried_;  // prediction at sub-frame 2k - 1
  std::vector<float> window_;
  std::vector<double> timings_;
};

// Per-frame inference over a whole recording with the same windows the
// stream uses.
RigSequence offline_inference(const StudentNet& net, const AudioTrack& track,
                              const StreamConfig& config);

struct LatencyReport {
  double future_context_ms = 0.0;
  double smoothing_ms = 0.0;
  double inference_ms_p50 = 0.0;
  double inference_ms_p95 = 0.0;
  double total_ms = 0.0;
};

// Nearest-rank percentiles of single-forward wall times. Needs >= 100
// emitted frames (kTooFewFrames otherwise).
LatencyReport latency_report(const StreamEngine& engine);
LatencyReport make_latency_report(int future_ms, bool ensemble,
                                  const std::vector<double>& inference_ms);

}  // namespace rigdistill

#endif  // RIGDISTILL_REALTIME_H_
