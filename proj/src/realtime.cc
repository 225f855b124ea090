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

#include "rigdistill/realtime.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "rigdistill/error.h"

namespace rigdistill {

void validate_ensemble_weights(const EnsembleWeights& alphas) {
  double sum = 0.0;
  for (double a : alphas) {
    if (!std::isfinite(a) || a < 0.0 || a > 1.0) {
      fail(ErrorKind::kInvalidArgument, "ensemble weights must lie in [0, 1]");
    }
    sum += a;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    fail(ErrorKind::kInvalidArgument,
         "ensemble weights must sum to 1, got " + std::to_string(sum));
  }
}

RigFrame ensemble_combine(const RigFrame& prev, const RigFrame& curr, const RigFrame& next,
                          const EnsembleWeights& alphas) {
  validate_ensemble_weights(alphas);
  RigFrame out;
  for (std::size_t i = 0; i < kRigDims; ++i) {
    const double v = alphas[0] * prev[i] + alphas[1] * curr[i] + alphas[2] * next[i];
    out[i] = static_cast<float>(std::clamp(v, -1.0, 1.0));
  }
  return out;
}

std::int64_t subframe_center(std::int64_t j) {
  const std::int64_t num = 1600 * j + 3;
  return num >= 0 ? num / 6 : -((-num + 5) / 6);
}

SampleRing::SampleRing(std::size_t capacity) : buffer_(capacity, 0.0f) {
  if (capacity == 0) fail(ErrorKind::kInvalidArgument, "ring capacity must be positive");
}

std::size_t SampleRing::push(std::span<const float> samples) {
  const std::uint64_t w = written_.load(std::memory_order_relaxed);
  const std::uint64_t floor = floor_.load(std::memory_order_acquire);
  const std::uint64_t free = buffer_.size() - (w - floor);
  const std::size_t n = static_cast<std::size_t>(std::min<std::uint64_t>(free, samples.size()));
  for (std::size_t i = 0; i < n; ++i) buffer_[(w + i) % buffer_.size()] = samples[i];
  written_.store(w + n, std::memory_order_release);
  return n;
}

void SampleRing::read(std::int64_t start, std::span<float> out) const {
  const auto w = static_cast<std::int64_t>(written_.load(std::memory_order_acquire));
  const auto floor = static_cast<std::int64_t>(floor_.load(std::memory_order_relaxed));
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::int64_t idx = start + static_cast<std::int64_t>(i);
    if (idx < 0 || idx >= w) {
      out[i] = 0.0f;
      continue;
    }
    if (idx < floor) fail(ErrorKind::kInternal, "ring read below the released floor");
    out[i] = buffer_[static_cast<std::size_t>(idx) % buffer_.size()];
  }
}

void SampleRing::release_before(std::int64_t index) {
  if (index <= 0) return;
  const auto target = static_cast<std::uint64_t>(index);
  const std::uint64_t limit = written_.load(std::memory_order_acquire);
  const std::uint64_t current = floor_.load(std::memory_order_relaxed);
  const std::uint64_t next = std::max(current, std::min(target, limit));
  floor_.store(next, std::memory_order_release);
}

StreamEngine::StreamEngine(const StudentNet& net, StreamConfig config)
    : net_(net), config_(config), window_(kWindowSamples) {
  validate_ensemble_weights(config_.alphas);
}

std::size_t StreamEngine::push_audio(std::span<const float> samples,
                                     std::optional<std::uint64_t> first_sample_index) {
  if (finished_.load(std::memory_order_acquire)) {
    fail(ErrorKind::kInvalidArgument, "push_audio after finish");
  }
  if (samples.empty()) return 0;
  if (first_sample_index && *first_sample_index != ring_.written()) {
    gap_.store(true, std::memory_order_release);
    return 0;
  }
  for (float v : samples) {
    if (!std::isfinite(v)) fail(ErrorKind::kNonFinite, "non-finite audio sample pushed");
  }
  return ring_.push(samples);
}

void StreamEngine::finish() { finished_.store(true, std::memory_order_release); }

bool StreamEngine::done() const {
  return finished_.load(std::memory_order_acquire) &&
         next_index_ >= frame_count(static_cast<std::size_t>(ring_.written()));
}

RigFrame StreamEngine::predict_at(std::int64_t anchor) {
  const std::int64_t past = static_cast<std::int64_t>(kWindowMs - future_ms()) *
                            static_cast<std::int64_t>(kSamplesPerMs);
  ring_.read(anchor - past, window_);
  const auto t0 = std::chrono::steady_clock::now();
  RigFrame out = net_.forward(window_);
  const auto t1 = std::chrono::steady_clock::now();
  timings_.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  ++forwards_;
  return out;
}

std::optional<StreamFrame> StreamEngine::next_frame() {
  if (gap_.load(std::memory_order_acquire)) {
    fail(ErrorKind::kAudioGap, "sample counter discontinuity in pushed audio");
  }
  const bool finished = finished_.load(std::memory_order_acquire);
  const std::uint64_t written = ring_.written();
  const auto k = static_cast<std::int64_t>(next_index_);
  const std::int64_t future = static_cast<std::int64_t>(future_ms()) *
                              static_cast<std::int64_t>(kSamplesPerMs);
  const std::int64_t past = static_cast<std::int64_t>(kWindowMs) *
                                static_cast<std::int64_t>(kSamplesPerMs) -
                            future;
  if (finished) {
    if (next_index_ >= frame_count(static_cast<std::size_t>(written))) return std::nullopt;
  } else {
    const std::int64_t anchor = config_.ensemble ? subframe_center(2 * k + 1) : frame_center(k);
    const bool in_track = static_cast<std::uint64_t>(1600 * k) <= 3 * written;
    if (!in_track || static_cast<std::int64_t>(written) < anchor + future) return std::nullopt;
  }

  StreamFrame frame;
  frame.frame_index = next_index_;
  if (config_.ensemble) {
    const RigFrame curr = predict_at(subframe_center(2 * k));
    // the stream has no sub-frame before frame 0; repeat the first one
    const RigFrame prev = carried_ ? *carried_ : curr;
    const RigFrame next = predict_at(subframe_center(2 * k + 1));
    frame.rig = ensemble_combine(prev, curr, next, config_.alphas);
    carried_ = next;
    ring_.release_before(subframe_center(2 * k + 2) - past);
  } else {
    frame.rig = predict_at(frame_center(k));
    ring_.release_before(frame_center(k + 1) - past);
  }
  ++next_index_;
  return frame;
}

RigSequence offline_inference(const StudentNet& net, const AudioTrack& track,
                              const StreamConfig& config) {
  validate_ensemble_weights(config.alphas);
  const std::int64_t past = static_cast<std::int64_t>(kWindowMs - net.config().future_ms) *
                            static_cast<std::int64_t>(kSamplesPerMs);
  std::vector<float> window(kWindowSamples);
  auto predict = [&](std::int64_t anchor) {
    copy_window(track.samples, anchor - past, window);
    return net.forward(window);
  };
  const std::size_t n = frame_count(track);
  RigSequence out(n);
  if (!config.ensemble) {
    for (std::size_t k = 0; k < n; ++k) out[k] = predict(frame_center(static_cast<std::int64_t>(k)));
    return out;
  }
  RigFrame prev{};
  for (std::size_t k = 0; k < n; ++k) {
    const auto j = static_cast<std::int64_t>(2 * k);
    const RigFrame curr = predict(subframe_center(j));
    if (k == 0) prev = curr;
    const RigFrame next = predict(subframe_center(j + 1));
    out[k] = ensemble_combine(prev, curr, next, config.alphas);
    prev = next;
  }
  return out;
}

LatencyReport make_latency_report(int future_ms, bool ensemble,
                                  const std::vector<double>& inference_ms) {
  if (inference_ms.empty()) fail(ErrorKind::kTooFewFrames, "no inference timings");
  std::vector<double> sorted = inference_ms;
  std::sort(sorted.begin(), sorted.end());
  auto rank = [&](double p) {
    const auto idx = static_cast<std::size_t>(std::ceil(p / 100.0 * sorted.size()));
    return sorted[std::max<std::size_t>(idx, 1) - 1];
  };
  LatencyReport r;
  r.future_context_ms = future_ms;
  r.smoothing_ms = ensemble ? kSmoothingMs : 0.0;
  r.inference_ms_p50 = rank(50.0);
  r.inference_ms_p95 = rank(95.0);
  r.total_ms = r.future_context_ms + r.smoothing_ms + r.inference_ms_p95;
  return r;
}

LatencyReport latency_report(const StreamEngine& engine) {
  if (engine.frames_emitted() < 100) {
    fail(ErrorKind::kTooFewFrames, "latency report needs >= 100 frames, got " +
                                       std::to_string(engine.frames_emitted()));
  }
  return make_latency_report(engine.future_ms(), engine.config().ensemble,
                             engine.inference_ms());
}

}  // namespace rigdistill
