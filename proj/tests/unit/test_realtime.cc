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

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <thread>
#include <vector>

#include "rigdistill/error.h"
#include "rigdistill/realtime.h"

using namespace rigdistill;

namespace {

StudentNet small_net(std::size_t c, int d, std::uint64_t seed = 1) {
  StudentConfig cfg;
  cfg.channels = c;
  cfg.future_ms = d;
  cfg.seed = seed;
  return StudentNet(cfg);
}

RigSequence stream_all(const StudentNet& net, const AudioTrack& track, const StreamConfig& sc,
                       std::size_t chunk, StreamEngine** keep = nullptr) {
  static thread_local std::unique_ptr<StreamEngine> holder;
  holder = std::make_unique<StreamEngine>(net, sc);
  StreamEngine& e = *holder;
  RigSequence out;
  std::size_t pos = 0;
  while (pos < track.samples.size()) {
    const std::size_t n = std::min(chunk, track.samples.size() - pos);
    pos += e.push_audio(std::span<const float>(track.samples).subspan(pos, n));
    while (auto f = e.next_frame()) {
      CHECK(f->frame_index == out.size());
      out.push_back(f->rig);
    }
  }
  e.finish();
  while (auto f = e.next_frame()) out.push_back(f->rig);
  CHECK(e.done());
  if (keep) *keep = holder.get();
  return out;
}

RigFrame filled(float v) {
  RigFrame f;
  f.fill(v);
  return f;
}

}  // namespace

TEST_SUITE("realtime") {

TEST_CASE("ensemble weights") {
  CHECK_NOTHROW(validate_ensemble_weights({1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}));
  CHECK_THROWS_AS(validate_ensemble_weights({0.5, 0.5, 0.5}), Error);
  CHECK_THROWS_AS(validate_ensemble_weights({-0.1, 0.6, 0.5}), Error);
  CHECK_THROWS_AS(ensemble_combine(filled(0), filled(0), filled(0), {1.2, -0.2, 0.0}), Error);
}

TEST_CASE("ensemble combine examples") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<float> d(-1.0f, 1.0f);
  RigFrame a, b, c;
  for (std::size_t i = 0; i < kRigDims; ++i) {
    a[i] = d(rng);
    b[i] = d(rng);
    c[i] = d(rng);
  }
  CHECK(ensemble_combine(a, b, c, {1, 0, 0}) == a);
  CHECK(ensemble_combine(a, b, c, {0, 1, 0}) == b);
  CHECK(ensemble_combine(b, b, b, {0.2, 0.5, 0.3}) == b);
  const RigFrame mean = ensemble_combine(filled(0.3f), filled(0.6f), filled(-0.3f),
                                         {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
  CHECK(mean[0] == doctest::Approx(0.2).epsilon(1e-6));
  const RigFrame mix = ensemble_combine(a, b, c, {0.2, 0.5, 0.3});
  for (std::size_t i = 0; i < kRigDims; ++i) {
    const double oracle = 0.2 * a[i] + 0.5 * b[i] + 0.3 * c[i];
    CHECK(mix[i] == doctest::Approx(oracle).epsilon(1e-6));
    CHECK(mix[i] >= std::min({a[i], b[i], c[i]}));
    CHECK(mix[i] <= std::max({a[i], b[i], c[i]}));
  }
}

TEST_CASE("sub-frame grid") {
  CHECK(subframe_center(0) == 0);
  CHECK(subframe_center(1) == 267);
  CHECK(subframe_center(2) == frame_center(1));
  CHECK(subframe_center(-1) == -267);
  for (std::int64_t k = 0; k < 300; ++k) {
    CHECK(subframe_center(2 * k) == frame_center(k));
    const std::int64_t before = subframe_center(2 * k) - subframe_center(2 * k - 1);
    const std::int64_t after = subframe_center(2 * k + 1) - subframe_center(2 * k);
    CHECK(before >= 266);
    CHECK(before <= 267);
    CHECK(after >= 266);
    CHECK(after <= 267);
  }
}

TEST_CASE("ring: empty push, capacity, monotone counter") {
  SampleRing ring(16);
  CHECK(ring.push({}) == 0);
  CHECK(ring.written() == 0);
  std::vector<float> data(40);
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = float(i);
  CHECK(ring.push(std::span<const float>(data).subspan(0, 10)) == 10);
  // only 6 free slots until the consumer releases
  CHECK(ring.push(std::span<const float>(data).subspan(10, 10)) == 6);
  CHECK(ring.written() == 16);
  ring.release_before(12);
  CHECK(ring.push(std::span<const float>(data).subspan(16, 20)) == 12);
  CHECK(ring.written() == 28);
  std::vector<float> out(20);
  ring.read(12, out);
  for (std::size_t i = 0; i < 16; ++i) CHECK(out[i] == float(12 + i));
  for (std::size_t i = 16; i < 20; ++i) CHECK(out[i] == 0.0f);
  std::vector<float> before(4);
  SampleRing fresh(16);
  fresh.read(-4, before);
  for (float v : before) CHECK(v == 0.0f);
}

TEST_CASE("frame 0 is ready once its future context is buffered") {
  const StudentNet net = small_net(4, 64);
  StreamEngine e(net, {});
  const std::vector<float> samples(1024, 0.1f);
  CHECK(e.push_audio(std::span<const float>(samples).subspan(0, 1023)) == 1023);
  CHECK_FALSE(e.next_frame().has_value());
  e.push_audio(std::span<const float>(samples).subspan(1023, 1));
  const auto f = e.next_frame();
  REQUIRE(f.has_value());
  CHECK(f->frame_index == 0);
}

TEST_CASE("streaming equals offline inference bit for bit") {
  const AudioTrack track = synth_speech(4, 2.3);
  for (int d : {0, 64, 256}) {
    const StudentNet net = small_net(8, d, 2);
    for (bool ensemble : {false, true}) {
      StreamConfig sc;
      sc.ensemble = ensemble;
      const RigSequence offline = offline_inference(net, track, sc);
      CHECK(offline.size() == frame_count(track));
      for (std::size_t chunk : {1000, 4096, 160}) {
        CHECK(stream_all(net, track, sc, chunk) == offline);
      }
    }
  }
}

TEST_CASE("ensemble doubles the forward count; alpha (0,1,0) equals plain output") {
  const AudioTrack track = synth_speech(6, 1.5);
  const StudentNet net = small_net(4, 64);
  StreamEngine* plain = nullptr;
  const RigSequence p = stream_all(net, track, {}, 800, &plain);
  const auto plain_forwards = plain->forward_count();
  CHECK(plain_forwards == p.size());
  StreamConfig sc;
  sc.ensemble = true;
  sc.alphas = {0.0, 1.0, 0.0};
  StreamEngine* ens = nullptr;
  const RigSequence q = stream_all(net, track, sc, 800, &ens);
  CHECK(ens->forward_count() == 2 * plain_forwards);
  CHECK(q == p);
}

TEST_CASE("constant audio settles to a constant rig") {
  AudioTrack track;
  track.samples.assign(48000, 0.2f);
  const StudentNet net = small_net(4, 64);
  const RigSequence out = offline_inference(net, track, {});
  // once the window is entirely inside the constant signal
  const RigFrame& ref = out[40];
  for (std::size_t k = 41; k + 10 < out.size(); ++k) CHECK(out[k] == ref);
}

TEST_CASE("gap in the sample counter is an error") {
  const StudentNet net = small_net(4, 64);
  StreamEngine e(net, {});
  const std::vector<float> s(500, 0.0f);
  CHECK(e.push_audio(s, 0) == 500);
  CHECK(e.push_audio(s, 500) == 500);
  CHECK(e.push_audio(s, 2000) == 0);
  try {
    e.next_frame();
    FAIL("expected kAudioGap");
  } catch (const Error& err) {
    CHECK(err.kind() == ErrorKind::kAudioGap);
  }
}

TEST_CASE("producer and consumer threads") {
  const AudioTrack track = synth_speech(8, 2.0);
  const StudentNet net = small_net(4, 128);
  StreamConfig sc;
  sc.ensemble = true;
  const RigSequence offline = offline_inference(net, track, sc);
  StreamEngine e(net, sc);
  std::thread producer([&] {
    std::size_t pos = 0;
    while (pos < track.samples.size()) {
      const std::size_t n = std::min<std::size_t>(333, track.samples.size() - pos);
      pos += e.push_audio(std::span<const float>(track.samples).subspan(pos, n));
      std::this_thread::yield();
    }
    e.finish();
  });
  RigSequence out;
  while (!e.done()) {
    if (auto f = e.next_frame()) {
      out.push_back(f->rig);
    } else {
      std::this_thread::yield();
    }
  }
  producer.join();
  CHECK(out == offline);
}

TEST_CASE("latency report") {
  const std::vector<double> t{1.0, 2.0, 3.0, 4.0};
  const LatencyReport plain = make_latency_report(256, false, t);
  CHECK(plain.future_context_ms == 256);
  CHECK(plain.smoothing_ms == 0.0);
  const LatencyReport smooth = make_latency_report(64, true, t);
  CHECK(smooth.future_context_ms + smooth.smoothing_ms == doctest::Approx(80.7).epsilon(1e-12));
  CHECK(std::round(smooth.future_context_ms + smooth.smoothing_ms) == 81.0);
  CHECK(smooth.inference_ms_p50 == 2.0);
  CHECK(smooth.inference_ms_p95 == 4.0);
  CHECK(smooth.total_ms == smooth.future_context_ms + smooth.smoothing_ms + smooth.inference_ms_p95);

  const StudentNet net = small_net(4, 64);
  StreamEngine* e = nullptr;
  stream_all(net, synth_speech(1, 2.0), {}, 1600, &e);
  try {
    latency_report(*e);
    FAIL("61 frames should be too few");
  } catch (const Error& err) {
    CHECK(err.kind() == ErrorKind::kTooFewFrames);
  }
  stream_all(net, synth_speech(1, 4.0), {}, 1600, &e);
  const LatencyReport r = latency_report(*e);
  CHECK(r.inference_ms_p95 >= r.inference_ms_p50);
  CHECK(r.total_ms == r.future_context_ms + r.smoothing_ms + r.inference_ms_p95);
}

}  // TEST_SUITE
