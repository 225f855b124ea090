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

#ifndef RIGDISTILL_AUDIO_H_
#define RIGDISTILL_AUDIO_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rigdistill/types.h"

namespace rigdistill {

struct AudioTrack {
  std::vector<float> samples;
  std::size_t sample_rate = kSampleRate;

  double duration_s() const {
    return static_cast<double>(samples.size()) / static_cast<double>(sample_rate);
  }
};

struct AudioWindow {
  std::vector<float> samples;
  std::size_t frame_index = 0;
  int past_ms = 0;
  int future_ms = 0;
};

enum class WavEncoding { kPcm16, kFloat32 };

// Mono 16 kHz only; 16-bit PCM is scaled by 1/32768, float samples are
// clamped to [-1, 1]. Errors: kSampleRate, kChannelCount,
// kUnsupportedEncoding, kMalformed, kTruncated.
AudioTrack load_wav(const std::string& path);
AudioTrack decode_wav(const std::vector<std::uint8_t>& bytes,
                      const std::string& origin = "wav");

// Interleaved samples; any rate/channel count so rejected inputs can be
// produced as well.
std::vector<std::uint8_t> encode_wav(std::span<const float> interleaved,
                                     std::size_t sample_rate, std::size_t channels,
                                     WavEncoding encoding);
void save_wav(const AudioTrack& track, const std::string& path,
              WavEncoding encoding = WavEncoding::kPcm16);

// Rounds to nearest and clamps to the 16-bit range.
std::int16_t to_pcm16(float sample);

// floor(duration * 30) + 1.
std::size_t frame_count(std::size_t sample_count);
inline std::size_t frame_count(const AudioTrack& track) {
  return frame_count(track.samples.size());
}

// Sample index of frame k's time k/30 s, rounded to nearest.
std::int64_t frame_center(std::int64_t frame_index);

// First sample of the window for frame k; the window spans
// [start, start + 8192) with (512 - d) ms before the frame time.
std::int64_t window_start(std::int64_t frame_index, int future_ms);

// Copies the window around an arbitrary anchor sample; out-of-range samples
// are zero.
void copy_window(std::span<const float> samples, std::int64_t start, std::span<float> out);

AudioWindow extract_window(const AudioTrack& track, std::int64_t frame_index, int future_ms);

// Deterministic speech-like signal: voiced syllables with moving formants,
// fricative noise, and closures labelled p/b/m. Intervals are optional.
AudioTrack synth_speech(std::uint64_t seed, double seconds,
                        std::vector<PhonemeInterval>* intervals = nullptr);

}  // namespace rigdistill

#endif  // RIGDISTILL_AUDIO_H_
