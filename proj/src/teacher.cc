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

#include "rigdistill/teacher.h"

#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <numbers>
#include <random>

#include <unsupported/Eigen/FFT>

#include "binary_io.h"
#include "rigdistill/error.h"

namespace rigdistill {

namespace {

constexpr std::size_t kSubWindowSamples = kWindowSamples / SyntheticTeacher::kSubWindows;
constexpr double kLowHz = 80.0;
constexpr double kHighHz = 7600.0;

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

const std::vector<double>& hann() {
  static const std::vector<double> w = [] {
    std::vector<double> v(kSubWindowSamples);
    for (std::size_t i = 0; i < v.size(); ++i) {
      v[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                  static_cast<double>(v.size()));
    }
    return v;
  }();
  return w;
}

constexpr char kMagic[4] = {'R', 'D', 'L', 'B'};

}  // namespace

SyntheticTeacher::SyntheticTeacher(std::uint64_t seed) : seed_(seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> w(0.0, 1.0 / std::sqrt(static_cast<double>(kFeatures)));
  std::normal_distribution<double> b(0.0, 0.1);
  weight_.resize(kRigDims * kFeatures);
  for (double& v : weight_) v = w(rng);
  bias_.resize(kRigDims);
  for (double& v : bias_) v = b(rng);
  const double lo = hz_to_mel(kLowHz);
  const double hi = hz_to_mel(kHighHz);
  const double bin_hz = static_cast<double>(kSampleRate) / kSubWindowSamples;
  for (std::size_t i = 0; i <= kBands; ++i) {
    const double hz = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) / kBands);
    band_edges_[i] = static_cast<std::size_t>(std::lround(hz / bin_hz));
  }
  for (std::size_t i = 1; i <= kBands; ++i) {
    band_edges_[i] = std::max(band_edges_[i], band_edges_[i - 1] + 1);
  }
}

std::array<double, SyntheticTeacher::kFeatures> SyntheticTeacher::features(
    std::span<const float> window) const {
  if (window.size() != kWindowSamples) {
    fail(ErrorKind::kShape, "teacher window must have 8192 samples");
  }
  const auto& taper = hann();
  double norm = 0.0;
  for (double v : taper) norm += v * v;
  Eigen::FFT<double> fft;
  std::vector<double> frame(kSubWindowSamples);
  std::vector<std::complex<double>> spectrum;
  std::array<double, kFeatures> out{};
  for (std::size_t s = 0; s < kSubWindows; ++s) {
    for (std::size_t i = 0; i < kSubWindowSamples; ++i) {
      frame[i] = static_cast<double>(window[s * kSubWindowSamples + i]) * taper[i];
    }
    fft.fwd(spectrum, frame);
    for (std::size_t b = 0; b < kBands; ++b) {
      double energy = 0.0;
      for (std::size_t k = band_edges_[b]; k < band_edges_[b + 1]; ++k) {
        energy += std::norm(spectrum[k]);
      }
      energy /= norm * static_cast<double>(band_edges_[b + 1] - band_edges_[b]);
      out[s * kBands + b] = (std::log10(energy + 1e-10) + 4.0) / 4.0;
    }
  }
  return out;
}

RigFrame SyntheticTeacher::raw_frame(const AudioTrack& track, std::size_t frame_index) const {
  std::vector<float> window(kWindowSamples);
  copy_window(track.samples, window_start(static_cast<std::int64_t>(frame_index), kFutureMs),
              window);
  const auto f = features(window);
  RigFrame out;
  for (std::size_t r = 0; r < kRigDims; ++r) {
    double acc = bias_[r];
    for (std::size_t j = 0; j < kFeatures; ++j) acc += weight_[r * kFeatures + j] * f[j];
    out[r] = static_cast<float>(std::tanh(acc));
  }
  return out;
}

RigSequence SyntheticTeacher::label_track(const AudioTrack& track) const {
  const std::size_t n = frame_count(track);
  RigSequence out(n);
  std::array<double, kRigDims> state{};
  for (std::size_t k = 0; k < n; ++k) {
    const RigFrame raw = raw_frame(track, k);
    for (std::size_t r = 0; r < kRigDims; ++r) {
      state[r] = k == 0 ? raw[r] : kSmoothing * state[r] + (1.0 - kSmoothing) * raw[r];
      out[k][r] = static_cast<float>(state[r]);
    }
  }
  return out;
}

RigFrame SyntheticTeacher::label(const AudioTrack& track, std::size_t frame_index) const {
  if (frame_index >= frame_count(track)) {
    fail(ErrorKind::kInvalidArgument, "frame index past the end of the track");
  }
  std::array<double, kRigDims> state{};
  for (std::size_t k = 0; k <= frame_index; ++k) {
    const RigFrame raw = raw_frame(track, k);
    for (std::size_t r = 0; r < kRigDims; ++r) {
      state[r] = k == 0 ? raw[r] : kSmoothing * state[r] + (1.0 - kSmoothing) * raw[r];
    }
  }
  RigFrame out;
  for (std::size_t r = 0; r < kRigDims; ++r) out[r] = static_cast<float>(state[r]);
  return out;
}

void PseudoLabelDataset::validate() const {
  for (const auto& item : items) {
    if (item.audio && item.frames.size() != frame_count(*item.audio)) {
      fail(ErrorKind::kMalformed, item.path + ": " + std::to_string(item.frames.size()) +
                                      " label frames but audio has " +
                                      std::to_string(frame_count(*item.audio)));
    }
    for (const RigFrame& f : item.frames) {
      for (float v : f) {
        if (!std::isfinite(v) || v < -1.0f || v > 1.0f) {
          fail(ErrorKind::kMalformed, item.path + ": label value outside [-1, 1]");
        }
      }
    }
  }
}

std::vector<NamedTrack> load_corpus(const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) fail(ErrorKind::kIo, "corpus directory not found: " + dir);
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".wav") {
      names.push_back(entry.path().filename().string());
    }
  }
  std::sort(names.begin(), names.end());
  std::vector<NamedTrack> tracks;
  for (const auto& name : names) {
    auto audio = std::make_shared<AudioTrack>(load_wav((fs::path(dir) / name).string()));
    tracks.push_back({name, std::move(audio)});
  }
  return tracks;
}

PseudoLabelDataset generate_dataset(const std::vector<NamedTrack>& tracks,
                                    const SyntheticTeacher& teacher) {
  if (tracks.empty()) fail(ErrorKind::kEmptyInput, "corpus is empty");
  PseudoLabelDataset dataset;
  dataset.items.resize(tracks.size());
  const std::string provenance = "synthetic-teacher:seed=" + std::to_string(teacher.seed());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    auto& item = dataset.items[i];
    item.path = tracks[i].path;
    item.audio = tracks[i].audio;
    item.provenance = provenance;
    item.frames = teacher.label_track(*tracks[i].audio);
  }
  for (const auto& item : dataset.items) {
    if (item.frames.size() != frame_count(*item.audio)) {
      fail(ErrorKind::kInternal, "label/frame length mismatch for " + item.path);
    }
  }
  dataset.validate();
  return dataset;
}

void attach_audio(PseudoLabelDataset& dataset, const std::string& dir) {
  namespace fs = std::filesystem;
  for (auto& item : dataset.items) {
    item.audio = std::make_shared<AudioTrack>(load_wav((fs::path(dir) / item.path).string()));
  }
  dataset.validate();
}

std::vector<std::uint8_t> encode_labels(const PseudoLabelDataset& dataset) {
  io::Writer w;
  w.bytes(kMagic, 4);
  w.u32(kLabelVersion);
  w.u32(static_cast<std::uint32_t>(dataset.items.size()));
  for (const auto& item : dataset.items) {
    w.str(item.path);
    w.u32(static_cast<std::uint32_t>(item.frames.size()));
    w.u32(static_cast<std::uint32_t>(kRigDims));
    for (const RigFrame& f : item.frames) {
      for (float v : f) w.f32(v);
    }
  }
  return w.buffer();
}

PseudoLabelDataset decode_labels(const std::vector<std::uint8_t>& bytes,
                                 const std::string& origin) {
  io::Reader r(bytes, origin);
  char magic[4];
  r.bytes(magic, 4);
  if (std::string(magic, 4) != std::string(kMagic, 4)) {
    fail(ErrorKind::kMalformed, origin + ": not a label file (bad magic)");
  }
  const std::uint32_t version = r.u32();
  if (version != kLabelVersion) {
    fail(ErrorKind::kVersion, origin + ": unsupported label version " + std::to_string(version));
  }
  const std::uint32_t count = r.u32();
  PseudoLabelDataset dataset;
  for (std::uint32_t i = 0; i < count; ++i) {
    LabeledTrack item;
    item.path = r.str();
    const std::uint32_t frames = r.u32();
    const std::uint32_t dims = r.u32();
    if (dims != kRigDims) {
      fail(ErrorKind::kMalformed, origin + ": item " + item.path + " has " +
                                      std::to_string(dims) + " dims, expected 78");
    }
    r.need(static_cast<std::size_t>(frames) * dims * 4);
    item.frames.resize(frames);
    for (RigFrame& f : item.frames) {
      for (float& v : f) v = r.f32();
    }
    item.provenance = "file:" + origin;
    dataset.items.push_back(std::move(item));
  }
  if (r.remaining() != 0) fail(ErrorKind::kMalformed, origin + ": trailing bytes");
  dataset.validate();
  return dataset;
}

void save_labels(const PseudoLabelDataset& dataset, const std::string& path) {
  io::write_file(path, encode_labels(dataset));
}

PseudoLabelDataset load_labels(const std::string& path) {
  return decode_labels(io::read_file(path), path);
}

}  // namespace rigdistill
