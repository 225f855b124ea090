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

#include "rigdistill/audio.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "binary_io.h"
#include "rigdistill/error.h"

namespace rigdistill {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

}  // namespace

AudioTrack decode_wav(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
  io::Reader r(bytes, origin);
  char tag[4];
  if (bytes.size() < 12) fail(ErrorKind::kMalformed, origin + ": too short for a RIFF header");
  r.bytes(tag, 4);
  if (std::string(tag, 4) != "RIFF") fail(ErrorKind::kMalformed, origin + ": missing RIFF tag");
  r.u32();
  r.bytes(tag, 4);
  if (std::string(tag, 4) != "WAVE") fail(ErrorKind::kMalformed, origin + ": missing WAVE tag");

  bool have_fmt = false;
  bool have_data = false;
  std::uint16_t format = 0, channels = 0, block_align = 0, bits = 0;
  std::uint32_t rate = 0;
  std::size_t data_offset = 0, data_size = 0;
  while (r.remaining() >= 8) {
    r.bytes(tag, 4);
    const std::string id(tag, 4);
    const std::uint32_t size = r.u32();
    if (size > r.remaining()) {
      fail(ErrorKind::kTruncated, origin + ": chunk '" + id + "' runs past end of file");
    }
    const std::size_t chunk_start = r.position();
    if (id == "fmt ") {
      if (size < 16) fail(ErrorKind::kMalformed, origin + ": fmt chunk too small");
      format = r.u16();
      channels = r.u16();
      rate = r.u32();
      r.u32();
      block_align = r.u16();
      bits = r.u16();
      if (format == kFormatExtensible) {
        if (size < 40) fail(ErrorKind::kMalformed, origin + ": short extensible fmt chunk");
        r.u16();
        r.u16();
        r.u32();
        format = r.u16();
      }
      have_fmt = true;
    } else if (id == "data") {
      data_offset = chunk_start;
      data_size = size;
      have_data = true;
    }
    r.skip(chunk_start + size - r.position());
    if ((size & 1u) && r.remaining() > 0) r.skip(1);
  }
  if (!have_fmt) fail(ErrorKind::kMalformed, origin + ": missing fmt chunk");
  if (!have_data) fail(ErrorKind::kMalformed, origin + ": missing data chunk");
  if (channels != 1) {
    fail(ErrorKind::kChannelCount,
         origin + ": expected mono, got " + std::to_string(channels) + " channels");
  }
  if (rate != kSampleRate) {
    fail(ErrorKind::kSampleRate,
         origin + ": expected 16000 Hz, got " + std::to_string(rate) + " Hz");
  }
  const bool pcm16 = format == kFormatPcm && bits == 16;
  const bool float32 = format == kFormatFloat && bits == 32;
  if (!pcm16 && !float32) {
    fail(ErrorKind::kUnsupportedEncoding, origin + ": unsupported encoding (format " +
                                              std::to_string(format) + ", " +
                                              std::to_string(bits) + " bits)");
  }
  const std::size_t width = bits / 8;
  if (block_align != width) fail(ErrorKind::kMalformed, origin + ": inconsistent block align");

  AudioTrack track;
  const std::size_t n = data_size / width;
  track.samples.resize(n);
  io::Reader data(bytes, origin);
  data.skip(data_offset);
  for (std::size_t i = 0; i < n; ++i) {
    if (pcm16) {
      const auto v = static_cast<std::int16_t>(data.u16());
      track.samples[i] = static_cast<float>(v) / 32768.0f;
    } else {
      const float v = data.f32();
      if (!std::isfinite(v)) fail(ErrorKind::kNonFinite, origin + ": non-finite sample");
      track.samples[i] = std::clamp(v, -1.0f, 1.0f);
    }
  }
  return track;
}

AudioTrack load_wav(const std::string& path) { return decode_wav(io::read_file(path), path); }

std::int16_t to_pcm16(float sample) {
  const double scaled = std::nearbyint(static_cast<double>(sample) * 32768.0);
  return static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
}

std::vector<std::uint8_t> encode_wav(std::span<const float> interleaved,
                                     std::size_t sample_rate, std::size_t channels,
                                     WavEncoding encoding) {
  const std::uint16_t width = encoding == WavEncoding::kPcm16 ? 2 : 4;
  const std::uint32_t data_size = static_cast<std::uint32_t>(interleaved.size() * width);
  io::Writer w;
  w.bytes("RIFF", 4);
  w.u32(36 + data_size);
  w.bytes("WAVE", 4);
  w.bytes("fmt ", 4);
  w.u32(16);
  w.u16(encoding == WavEncoding::kPcm16 ? kFormatPcm : kFormatFloat);
  w.u16(static_cast<std::uint16_t>(channels));
  w.u32(static_cast<std::uint32_t>(sample_rate));
  w.u32(static_cast<std::uint32_t>(sample_rate * channels * width));
  w.u16(static_cast<std::uint16_t>(channels * width));
  w.u16(static_cast<std::uint16_t>(width * 8));
  w.bytes("data", 4);
  w.u32(data_size);
  for (float v : interleaved) {
    if (encoding == WavEncoding::kPcm16) {
      w.u16(static_cast<std::uint16_t>(to_pcm16(v)));
    } else {
      w.f32(v);
    }
  }
  return w.buffer();
}

void save_wav(const AudioTrack& track, const std::string& path, WavEncoding encoding) {
  io::write_file(path, encode_wav(track.samples, track.sample_rate, 1, encoding));
}

std::size_t frame_count(std::size_t sample_count) {
  return sample_count * kFrameRate / kSampleRate + 1;
}

std::int64_t frame_center(std::int64_t k) {
  // round(k * 16000 / 30) in integers; halves cannot occur.
  return (k * 3200 + 3) / 6;
}

std::int64_t window_start(std::int64_t frame_index, int future_ms) {
  return frame_center(frame_index) -
         static_cast<std::int64_t>(kWindowMs - future_ms) *
             static_cast<std::int64_t>(kSamplesPerMs);
}

void copy_window(std::span<const float> samples, std::int64_t start, std::span<float> out) {
  const auto n = static_cast<std::int64_t>(samples.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::int64_t pos = start + static_cast<std::int64_t>(i);
    out[i] = (pos >= 0 && pos < n) ? samples[static_cast<std::size_t>(pos)] : 0.0f;
  }
}

AudioWindow extract_window(const AudioTrack& track, std::int64_t frame_index, int future_ms) {
  if (frame_index < 0) {
    fail(ErrorKind::kInvalidArgument,
         "frame index must be >= 0, got " + std::to_string(frame_index));
  }
  if (future_ms < 0 || future_ms > kWindowMs) {
    fail(ErrorKind::kInvalidArgument,
         "future context must lie in [0, 512] ms, got " + std::to_string(future_ms));
  }
  AudioWindow w;
  w.samples.resize(kWindowSamples);
  w.frame_index = static_cast<std::size_t>(frame_index);
  w.future_ms = future_ms;
  w.past_ms = kWindowMs - future_ms;
  copy_window(track.samples, window_start(frame_index, future_ms), w.samples);
  return w;
}

AudioTrack synth_speech(std::uint64_t seed, double seconds,
                        std::vector<PhonemeInterval>* intervals) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  const double fs = static_cast<double>(kSampleRate);
  std::mt19937_64 rng(seed);
  auto uni = [&](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  std::normal_distribution<double> noise(0.0, 1.0);

  AudioTrack track;
  const auto total = static_cast<std::size_t>(std::llround(seconds * fs));
  track.samples.assign(total, 0.0f);
  if (intervals) intervals->clear();

  static const char* kVowels[] = {"a", "e", "i", "o", "u"};
  static const char* kClosures[] = {"p", "b", "m"};
  static const char* kFricatives[] = {"s", "f"};
  double phase = 0.0;
  double prev_noise = 0.0;
  std::size_t pos = 0;
  while (pos < total) {
    const double pick = uni(0.0, 1.0);
    std::string label;
    std::size_t len = 0;
    if (pick < 0.55) {
      label = kVowels[rng() % 5];
      len = static_cast<std::size_t>(uni(0.12, 0.28) * fs);
      const double f0a = uni(90.0, 220.0);
      const double f0b = f0a * uni(0.85, 1.15);
      const double formants[3] = {uni(300.0, 900.0), uni(900.0, 2500.0), uni(2400.0, 3200.0)};
      const double amp = uni(0.15, 0.5);
      for (std::size_t i = 0; i < len && pos + i < total; ++i) {
        const double u = static_cast<double>(i) / static_cast<double>(len);
        const double f0 = f0a + (f0b - f0a) * u;
        phase += kTwoPi * f0 / fs;
        double v = 0.0;
        for (int h = 1; h * f0 < 7000.0; ++h) {
          const double f = h * f0;
          double gain = 0.05;
          for (double F : formants) gain += std::exp(-((f - F) / 150.0) * ((f - F) / 150.0));
          v += gain * std::sin(h * phase) / std::sqrt(static_cast<double>(h));
        }
        track.samples[pos + i] = static_cast<float>(amp * std::sin(std::numbers::pi * u) * v * 0.3);
      }
    } else if (pick < 0.80) {
      label = kClosures[rng() % 3];
      len = static_cast<std::size_t>(uni(0.06, 0.12) * fs);
      const std::size_t burst = static_cast<std::size_t>(0.015 * fs);
      const double f0 = uni(90.0, 200.0);
      for (std::size_t i = 0; i < len + burst && pos + i < total; ++i) {
        double v = 0.0;
        if (label == "m") {
          phase += kTwoPi * f0 / fs;
          v = i < len ? 0.04 * std::sin(phase) : 0.0;
        } else if (i >= len) {
          v = 0.15 * noise(rng);
        }
        track.samples[pos + i] = static_cast<float>(v);
      }
      len += burst;
    } else if (pick < 0.92) {
      label = kFricatives[rng() % 2];
      len = static_cast<std::size_t>(uni(0.08, 0.16) * fs);
      const double amp = uni(0.05, 0.1);
      for (std::size_t i = 0; i < len && pos + i < total; ++i) {
        const double w = noise(rng);
        track.samples[pos + i] = static_cast<float>(amp * (w - prev_noise));
        prev_noise = w;
      }
    } else {
      label = "sil";
      len = static_cast<std::size_t>(uni(0.1, 0.25) * fs);
    }
    const std::size_t end = std::min(total, pos + len);
    if (intervals && end > pos) {
      intervals->push_back({static_cast<double>(pos) / fs, static_cast<double>(end) / fs, label});
    }
    pos = end;
  }
  for (float& v : track.samples) v = std::clamp(v, -0.99f, 0.99f);
  return track;
}

}  // namespace rigdistill
