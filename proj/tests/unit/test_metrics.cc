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

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "rigdistill/audio.h"
#include "rigdistill/error.h"
#include "rigdistill/metrics.h"

using namespace rigdistill;

namespace {

template <typename F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error thrown");
  return ErrorKind::kInternal;
}

// y(upper) = rig[0], lower lip pinned at the origin.
LipGeometry opening_geometry() {
  LipGeometry g;
  g.upper.matrix[1][0] = 1.0;
  return g;
}

RigSequence openings(const std::vector<float>& d) {
  RigSequence out(d.size());
  for (std::size_t k = 0; k < d.size(); ++k) {
    out[k].fill(0.0f);
    out[k][0] = d[k];
  }
  return out;
}

// One interval around each listed frame's centre.
PhonemeIntervals around(const std::vector<std::int64_t>& frames, const std::string& label) {
  PhonemeIntervals out;
  for (std::int64_t k : frames) {
    const double t = double(frame_center(k)) / double(kSampleRate);
    out.push_back({t - 0.005, t + 0.005, label});
  }
  return out;
}

LipGeometry random_geometry(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  LipGeometry g;
  for (AffineMap* m : {&g.upper, &g.lower}) {
    for (auto& row : m->matrix)
      for (double& v : row) v = u(rng);
    for (double& v : m->offset) v = u(rng);
  }
  return g;
}

RigSequence random_frames(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  RigSequence out(n);
  for (auto& f : out)
    for (float& v : f) v = u(rng);
  return out;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("rig mse examples") {
  std::mt19937_64 rng(1);
  const RigSequence a = random_frames(rng, 12);
  CHECK(rig_mse(a, a) == 0.0);
  RigSequence zeros(5), shifted(5);
  for (std::size_t k = 0; k < 5; ++k) {
    zeros[k].fill(0.0f);
    shifted[k].fill(0.1f);
  }
  CHECK(rig_mse(shifted, zeros) == doctest::Approx(0.01).epsilon(1e-6));
  const RigSequence b = random_frames(rng, 12);
  long double acc = 0.0L;
  for (std::size_t k = 0; k < a.size(); ++k)
    for (std::size_t i = 0; i < kRigDims; ++i) {
      const long double d = (long double)a[k][i] - (long double)b[k][i];
      acc += d * d;
    }
  const double oracle = double(acc / (long double)(a.size() * kRigDims));
  CHECK(rig_mse(a, b) == doctest::Approx(oracle).epsilon(1e-12));
  CHECK(rig_mse(a, b) == rig_mse(b, a));
  CHECK(rig_mse(a, b) > 0.0);
  CHECK(kind_of([&] { rig_mse(a, zeros); }) == ErrorKind::kShape);
  CHECK(kind_of([&] { rig_mse({}, {}); }) == ErrorKind::kEmptyInput);
}

TEST_CASE("lip distance examples") {
  std::mt19937_64 rng(2);
  LipGeometry same = random_geometry(rng);
  same.lower = same.upper;
  for (const RigFrame& f : random_frames(rng, 10)) CHECK(lip_distance(f, same) == 0.0);

  LipGeometry flat;
  flat.upper.offset[1] = 0.3;
  for (const RigFrame& f : random_frames(rng, 10)) CHECK(lip_distance(f, flat) == doctest::Approx(0.3));

  // hand rig: two controls, upper y = 0.5 a + 0.1, lower y = -0.25 b - 0.1
  LipGeometry hand;
  hand.upper.matrix[1][0] = 0.5;
  hand.upper.offset[1] = 0.1;
  hand.lower.matrix[1][1] = -0.25;
  hand.lower.offset[1] = -0.1;
  hand.upper.matrix[0][1] = 7.0;  // x axis ignored
  RigFrame r{};
  r[0] = 0.5f;
  r[1] = -1.0f;
  // 0.35 - 0.15
  CHECK(lip_distance(r, hand) == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("pbm accuracy fixtures") {
  const LipGeometry g = opening_geometry();
  const PhonemeIntervals pbm = around({3, 4, 5, 10}, "/p/");
  CHECK(pbm_accuracy(openings(std::vector<float>(20, 0.0f)), pbm, g) == 100.0);
  CHECK(pbm_accuracy(openings(std::vector<float>(20, 0.2f)), pbm, g, 0.15) == 0.0);

  std::vector<float> d(20, 0.2f);
  d[12] = 0.1f;
  const PhonemeIntervals single = around({10}, "m");
  CHECK(pbm_accuracy(openings(d), single, g) == 100.0);
  CHECK(pbm_accuracy(openings(d), single, g, 0.15, 1) == 0.0);
  d[12] = 0.2f;
  d[13] = 0.1f;  // outside the window
  CHECK(pbm_accuracy(openings(d), single, g) == 0.0);

  // clamped at the ends
  std::vector<float> e(6, 0.2f);
  e[0] = 0.0f;
  CHECK(pbm_accuracy(openings(e), around({1}, "b"), g) == 100.0);

  const PbmCount c = pbm_count(openings(std::vector<float>(20, 0.0f)), pbm, g);
  CHECK(c.frames == 4);
  CHECK(c.hits == 4);
}

TEST_CASE("pbm frames need a bilabial interval") {
  const LipGeometry g = opening_geometry();
  const RigSequence f = openings(std::vector<float>(20, 0.0f));
  CHECK(kind_of([&] { pbm_accuracy(f, around({3}, "a"), g); }) == ErrorKind::kNoPbmFrames);
  CHECK(kind_of([&] { pbm_accuracy(f, {}, g); }) == ErrorKind::kNoPbmFrames);
  // an interval between two frame centres
  CHECK(kind_of([&] { pbm_accuracy(f, {{0.01, 0.02, "p"}}, g); }) == ErrorKind::kNoPbmFrames);
  CHECK(is_bilabial("p"));
  CHECK(is_bilabial("/b/"));
  CHECK(is_bilabial("m"));
  CHECK_FALSE(is_bilabial("f"));
  CHECK_FALSE(is_bilabial("pb"));
}

TEST_CASE("pbm accuracy is monotone in threshold and tolerance") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<float> u(0.0f, 0.4f);
  const LipGeometry g = opening_geometry();
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<float> d(60);
    for (float& v : d) v = u(rng);
    const RigSequence f = openings(d);
    const PhonemeIntervals iv = around({2, 7, 8, 9, 20, 31, 32, 50, 58, 59}, "p");
    double prev = -1.0;
    for (double th = 0.0; th <= 0.45; th += 0.025) {
      const double a = pbm_accuracy(f, iv, g, th, 2);
      CHECK(a >= prev);
      prev = a;
    }
    prev = -1.0;
    for (std::size_t tol = 0; tol <= 6; ++tol) {
      const double a = pbm_accuracy(f, iv, g, 0.15, tol);
      CHECK(a >= prev);
      prev = a;
    }
  }
}

TEST_CASE("jitter examples") {
  std::mt19937_64 rng(5);
  const LipGeometry g = random_geometry(rng);
  RigSequence constant(10);
  for (auto& f : constant) f.fill(0.25f);
  CHECK(jitter(constant, g) == 0.0);
  CHECK(kind_of([&] { jitter(RigSequence(2), g); }) == ErrorKind::kInvalidArgument);

  // lower lip y = 0.5 sin(w t) at 30 fps
  LipGeometry s;
  s.lower.matrix[1][0] = 0.5;
  s.lower.offset[1] = -0.3;
  const double w = 2.0 * std::numbers::pi * 3.0;
  RigSequence seq(45);
  std::vector<double> y(seq.size());
  for (std::size_t t = 0; t < seq.size(); ++t) {
    seq[t].fill(0.0f);
    seq[t][0] = float(std::sin(w * double(t) / 30.0));
    y[t] = 0.5 * double(seq[t][0]) - 0.3;
  }
  double acc = 0.0;
  for (std::size_t t = 2; t < y.size(); ++t) {
    const double a = y[t] - 2.0 * y[t - 1] + y[t - 2];
    acc += a * a;
  }
  const double oracle = acc / double(y.size() - 2);
  CHECK(jitter(seq, s) == doctest::Approx(oracle).epsilon(1e-10));
}

TEST_CASE("jitter is zero for affine ramps through random geometry") {
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<int> q(-256, 256);
  for (int trial = 0; trial < 50; ++trial) {
    const LipGeometry g = random_geometry(rng);
    RigFrame a{}, b{};
    for (std::size_t i = 0; i < kRigDims; ++i) {
      a[i] = float(q(rng)) / 1024.0f;
      b[i] = float(q(rng)) / 65536.0f;
    }
    RigSequence seq(30);
    for (std::size_t t = 0; t < seq.size(); ++t)
      for (std::size_t i = 0; i < kRigDims; ++i) seq[t][i] = a[i] + float(t) * b[i];
    CHECK(jitter(seq, g) == 0.0);
  }
}

TEST_CASE("geometry json") {
  std::mt19937_64 rng(7);
  const LipGeometry g = random_geometry(rng);
  const LipGeometry back = parse_lip_geometry(lip_geometry_json(g));
  for (std::size_t r = 0; r < 3; ++r) {
    CHECK(back.upper.offset[r] == g.upper.offset[r]);
    CHECK(back.lower.offset[r] == g.lower.offset[r]);
    for (std::size_t c = 0; c < kRigDims; ++c) {
      CHECK(back.upper.matrix[r][c] == g.upper.matrix[r][c]);
      CHECK(back.lower.matrix[r][c] == g.lower.matrix[r][c]);
    }
  }
  CHECK(kind_of([] { parse_lip_geometry("{"); }) == ErrorKind::kMalformed);
  CHECK(kind_of([] { parse_lip_geometry(R"({"upper":{"matrix":[[1]],"offset":[0,0,0]}})"); }) ==
        ErrorKind::kMalformed);
  const LipGeometry syn = synthetic_lip_geometry(3);
  CHECK_NOTHROW(syn.validate());
  RigFrame rest{};
  CHECK(lip_distance(rest, syn) == doctest::Approx(0.2));
  LipGeometry bad;
  bad.lower.offset[0] = std::nan("");
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("interval files") {
  const std::string text = "# header\n0.5\t0.6\tm\n0.1\t0.2\tp\n\n0.2\t0.3\ta\n";
  const PhonemeIntervals iv = parse_intervals(text);
  REQUIRE(iv.size() == 3);
  CHECK(iv[0].label == "p");
  CHECK(iv[2].start_s == 0.5);
  CHECK(parse_intervals(format_intervals(iv)).size() == 3);
  const PhonemeIntervals again = parse_intervals(format_intervals(iv));
  for (std::size_t i = 0; i < iv.size(); ++i) {
    CHECK(again[i].start_s == iv[i].start_s);
    CHECK(again[i].end_s == iv[i].end_s);
    CHECK(again[i].label == iv[i].label);
  }
  CHECK(kind_of([] { parse_intervals("0.3\t0.2\tp\n"); }) == ErrorKind::kMalformed);
  CHECK(kind_of([] { parse_intervals("0.1\t0.3\tp\n0.2\t0.4\tb\n"); }) == ErrorKind::kMalformed);
  CHECK(kind_of([] { parse_intervals("0.1 x p\n"); }) == ErrorKind::kMalformed);
}

}  // TEST_SUITE
