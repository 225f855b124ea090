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

// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "rigdistill/evaluate.h"
#include "rigdistill/gradcheck.h"
#include "rigdistill/losses.h"
#include "rigdistill/metrics.h"
#include "rigdistill/realtime.h"
#include "rigdistill/student_net.h"
#include "rigdistill/teacher.h"
#include "rigdistill/trainer.h"

using namespace rigdistill;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, a);
  return buf;
}

std::vector<float> noise_window(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> d(-0.5f, 0.5f);
  std::vector<float> w(kWindowSamples);
  for (float& v : w) v = d(rng);
  return w;
}

PseudoLabelDataset synthetic_dataset(std::uint64_t first_seed, std::size_t tracks, double seconds,
                                     const SyntheticTeacher& teacher) {
  std::vector<NamedTrack> named;
  for (std::size_t i = 0; i < tracks; ++i) {
    named.push_back({"track_" + std::to_string(i) + ".wav",
                     std::make_shared<AudioTrack>(synth_speech(first_seed + i, seconds))});
  }
  return generate_dataset(named, teacher);
}

// 1. Layer output shapes.
Outcome shape_chain() {
  for (std::size_t c : {64, 128, 256}) {
    const std::vector<Shape> want = {
        {1, 8192}, {c, 1637}, {c, 818}, {c, 408}, {c, 203}, {c, 101}, {c, 50}, {c, 25}, {c, 25}, {c, 25},
        {c, 12},   {c, 5},   {c, 2},   {c, 1},   {150},    {150},   {78},    {78}};
    const StudentNet net({c, 256, 1});
    if (net.trace_shapes(noise_window(c)) != want) {
      return {false, "C=" + std::to_string(c) + " traced shapes differ"};
    }
  }
  return {true, "8192 -> 1637 -> ... -> 1 -> 150 -> 150 -> 78 for C=64,128,256"};
}

// 2. MACs against the published counts.
Outcome mac_accounting() {
  const double m64 = double(StudentNet({64, 256, 0}).count_resources().mac_count);
  const double m128 = double(StudentNet({128, 256, 0}).count_resources().mac_count);
  const double m256 = double(StudentNet({256, 256, 0}).count_resources().mac_count);
  const bool ok = std::abs(m256 / 0.33e9 - 1.0) <= 0.10 && std::abs(m128 / 0.083e9 - 1.0) <= 0.15 &&
                  std::abs(m64 / 0.021e9 - 1.0) <= 0.20 && m128 / m64 >= 3.8 && m128 / m64 <= 4.2 &&
                  m256 / m128 >= 3.8 && m256 / m128 <= 4.2;
  return {ok, fmt("C=256 %.4g", m256) + fmt(" C=128 %.4g", m128) + fmt(" C=64 %.4g", m64) +
                  fmt(" ratios %.3f", m128 / m64) + fmt(" %.3f", m256 / m128)};
}

// 3. Peak fp32 inference memory.
Outcome memory_accounting() {
  const double b128 = double(StudentNet({128, 256, 0}).count_resources().peak_memory_bytes);
  const double b64 = double(StudentNet({64, 256, 0}).count_resources().peak_memory_bytes);
  return {b128 <= 10e6 && b64 <= 5e6,
          fmt("C=128 %.2f MB", b128 / 1e6) + fmt(" C=64 %.2f MB", b64 / 1e6)};
}

// 4. Finite differences over 100 seeds per op and for the C=16 network.
Outcome gradients() {
  GradCheckConfig cfg;
  cfg.seeds = 100;
  cfg.network_seeds = 100;
  cfg.tolerance = 1e-4;
  const GradCheckReport r = run_gradcheck(cfg);
  double worst = 0.0;
  std::string worst_op;
  for (const auto& e : r.entries) {
    if (e.max_rel_error >= worst) {
      worst = e.max_rel_error;
      worst_op = e.name;
    }
  }
  return {r.passed(), std::to_string(r.entries.size()) + " checks, worst " + worst_op +
                          fmt(" %.2e", worst)};
}

// 5. Loss identities.
Outcome loss_identities() {
  const SyntheticTeacher teacher(2);
  const PseudoLabelDataset ds = synthetic_dataset(70, 2, 1.0, teacher);
  const StudentNet s0({8, 256, 4});
  const StudentNet student({8, 64, 5});
  TrainConfig het;
  het.weights.alpha_feat = 0.0;
  TrainConfig hyb = het;
  hyb.mode = TrainMode::kHybrid;
  const auto taps = precompute_taps(ds, s0);
  const LossComponents a = evaluate_losses(ds, student, het);
  const LossComponents b = evaluate_losses(ds, student, hyb, taps);
  bool ok = std::abs(a.total - b.total) <= 1e-7 && b.feat > 0.0;

  // one optimisation step each way
  StudentNet x({8, 64, 5}), y({8, 64, 5});
  TrainConfig step = het;
  step.learning_rate = 1e-3;
  TrainConfig hstep = hyb;
  hstep.learning_rate = 1e-3;
  const TrainReport rx = train_heterogeneous(ds, x, step);
  const TrainReport ry = train_hybrid(ds, s0, y, hstep);
  ok = ok && std::abs(rx.final.total - ry.final.total) <= 1e-7;

  std::mt19937_64 rng(9);
  std::uniform_real_distribution<float> u(-0.5f, 0.5f);
  RigSequence p(20), q(20), c(20);
  for (std::size_t t = 0; t < 20; ++t)
    for (std::size_t i = 0; i < kRigDims; ++i) {
      p[t][i] = u(rng);
      q[t][i] = u(rng);
      c[t][i] = 0.25f;
    }
  RigFrame off;
  for (float& v : off) v = u(rng);
  RigSequence pc = p, qc = q;
  for (std::size_t t = 0; t < 20; ++t)
    for (std::size_t i = 0; i < kRigDims; ++i) {
      pc[t][i] += off[i];
      qc[t][i] += off[i];
    }
  const double v0 = loss_vel(c, c);
  const double v1 = loss_vel(p, q), v2 = loss_vel(pc, qc);
  ok = ok && v0 == 0.0 && std::abs(v1 - v2) <= 1e-7 * std::max(1.0, v1);

  std::vector<FeatureTaps> ft(5);
  for (auto& t : ft) {
    for (float& v : t.f1) v = u(rng);
    for (float& v : t.f2) v = u(rng);
    for (float& v : t.f3) v = u(rng);
  }
  const double f0 = loss_feat(ft, ft);
  ok = ok && f0 == 0.0;
  return {ok, fmt("|het - hybrid(feat=0)| %.2e", std::abs(a.total - b.total)) +
                  fmt(" after a step %.2e", std::abs(rx.final.total - ry.final.total)) +
                  fmt(" vel offset diff %.2e", std::abs(v1 - v2))};
}

// 6. Heterogeneous distillation drives rec below 5% of its start.
Outcome closed_loop() {
  const SyntheticTeacher teacher(1);
  const PseudoLabelDataset ds = synthetic_dataset(100, 3, 2.0, teacher);
  TrainConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.epochs = 200;
  cfg.seed = 3;
  const auto t0 = Clock::now();
  StudentNet a({16, 256, 5});
  const TrainReport ra = train_heterogeneous(ds, a, cfg);
  const double ratio = ra.final.rec / ra.initial.rec;
  StudentNet b({16, 256, 5});
  const TrainReport rb = train_heterogeneous(ds, b, cfg);
  const bool same = ra == rb && a.parameters() == b.parameters();
  return {ratio < 0.05 && same, fmt("rec %.4f", ra.initial.rec) + fmt(" -> %.4f", ra.final.rec) +
                                    fmt(" ratio %.4f", ratio) +
                                    (same ? " deterministic" : " NOT deterministic") +
                                    fmt(" %.0f s", seconds_since(t0))};
}

// 7. Hybrid KD with feature supervision vs its alpha_feat = 0 twin.
struct HybridSetup {
  std::size_t tracks = 6;
  double seconds = 3.0;
  int s0_epochs = 100;
  int student_epochs = 60;
  double learning_rate = 1e-3;
  double alpha_feat = 0.1;
  std::size_t seeds = 5;
};

Outcome hybrid_direction(const HybridSetup& h) {
  const SyntheticTeacher teacher(1);
  const PseudoLabelDataset ds = synthetic_dataset(200, h.tracks, h.seconds, teacher);
  const AudioTrack held = synth_speech(999, 4.0);
  const RigSequence held_labels = teacher.label_track(held);
  const auto t0 = Clock::now();
  StudentNet s0({16, 256, 11});
  TrainConfig base;
  base.learning_rate = h.learning_rate;
  base.epochs = h.s0_epochs;
  base.seed = 3;
  train_heterogeneous(ds, s0, base);

  std::vector<double> with, without;
  std::size_t wins = 0;
  for (std::size_t s = 0; s < h.seeds; ++s) {
    TrainConfig c;
    c.mode = TrainMode::kHybrid;
    c.learning_rate = h.learning_rate;
    c.epochs = h.student_epochs;
    c.seed = 100 + s;
    c.weights.alpha_feat = h.alpha_feat;
    StudentNet a({16, 64, 50 + s});
    train_hybrid(ds, s0, a, c);
    c.weights.alpha_feat = 0.0;
    StudentNet b({16, 64, 50 + s});
    train_hybrid(ds, s0, b, c);
    with.push_back(rig_mse(offline_inference(a, held, {}), held_labels));
    without.push_back(rig_mse(offline_inference(b, held, {}), held_labels));
    if (with.back() <= without.back()) ++wins;
  }
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  };
  const double mw = median(with), mo = median(without);
  return {mw <= mo, fmt("median held-out mse %.5f", mw) + fmt(" vs twin %.5f", mo) + " (" +
                        std::to_string(wins) + "/" + std::to_string(h.seeds) + " seeds)" +
                        fmt(" %.0f s", seconds_since(t0))};
}

// 8. Ensemble smoothing on noisy sub-frame streams, sign test over 20 seeds.
Outcome ensemble_smoothing() {
  const LipGeometry geom = synthetic_lip_geometry(5);
  const std::size_t frames = 120;
  std::size_t smoother = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(1000 + seed);
    std::uniform_real_distribution<double> phase(0.0, 6.283185307179586);
    std::normal_distribution<double> noise(0.0, 0.02);
    std::array<double, kRigDims> ph;
    for (double& p : ph) p = phase(rng);
    // sub-frame j sits at j / 60 s
    auto sub = [&](std::int64_t j) {
      RigFrame f;
      const double t = double(j) / 60.0;
      for (std::size_t i = 0; i < kRigDims; ++i) {
        f[i] = float(0.5 * std::sin(2.0 * 3.141592653589793 * 1.5 * t + ph[i]) + noise(rng));
      }
      return f;
    };
    std::vector<RigFrame> subs;
    for (std::int64_t j = 0; j <= std::int64_t(2 * frames); ++j) subs.push_back(sub(j));
    RigSequence plain(frames), smooth(frames);
    for (std::size_t k = 0; k < frames; ++k) {
      const RigFrame& prev = subs[k == 0 ? 0 : 2 * k - 1];
      plain[k] = subs[2 * k];
      smooth[k] = ensemble_combine(prev, subs[2 * k], subs[2 * k + 1],
                                   {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
    }
    if (jitter(smooth, geom) < jitter(plain, geom)) ++smoother;
  }
  // one-sided binomial tail P(X >= smoother) with p = 1/2
  double tail = 0.0;
  for (std::size_t k = smoother; k <= 20; ++k) {
    double c = 1.0;
    for (std::size_t i = 0; i < k; ++i) c = c * double(20 - i) / double(i + 1);
    tail += c / 1048576.0;
  }

  const AudioTrack track = synth_speech(77, 3.0);
  const StudentNet net({16, 64, 3});
  StreamConfig centre;
  centre.ensemble = true;
  centre.alphas = {0.0, 1.0, 0.0};
  const bool identical = offline_inference(net, track, centre) == offline_inference(net, track, {});
  return {tail < 0.05 && identical,
          std::to_string(smoother) + "/20 seeds smoother" + fmt(", sign test p=%.2e", tail) +
              (identical ? ", alpha (0,1,0) bit identical" : ", alpha (0,1,0) DIFFERS")};
}

// 9. Metric oracles.
Outcome metric_oracles() {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<int> q(-256, 256);
  bool ok = true;
  for (int trial = 0; trial < 100; ++trial) {
    LipGeometry g;
    for (AffineMap* m : {&g.upper, &g.lower}) {
      for (auto& row : m->matrix)
        for (double& v : row) v = u(rng);
      for (double& v : m->offset) v = u(rng);
    }
    RigFrame a, b;
    for (std::size_t i = 0; i < kRigDims; ++i) {
      a[i] = float(q(rng)) / 1024.0f;
      b[i] = float(q(rng)) / 65536.0f;
    }
    RigSequence ramp(40);
    for (std::size_t t = 0; t < ramp.size(); ++t)
      for (std::size_t i = 0; i < kRigDims; ++i) ramp[t][i] = a[i] + float(t) * b[i];
    ok = ok && jitter(ramp, g) == 0.0;
  }

  LipGeometry open;
  open.upper.matrix[1][0] = 1.0;
  auto seq = [](std::vector<float> d) {
    RigSequence s(d.size());
    for (std::size_t k = 0; k < d.size(); ++k) {
      s[k].fill(0.0f);
      s[k][0] = d[k];
    }
    return s;
  };
  auto at = [](std::int64_t k) {
    const double t = double(frame_center(k)) / double(kSampleRate);
    return PhonemeInterval{t - 0.005, t + 0.005, "p"};
  };
  const PhonemeIntervals many{at(3), at(4), at(9)};
  const double closed = pbm_accuracy(seq(std::vector<float>(15, 0.0f)), many, open);
  const double opened = pbm_accuracy(seq(std::vector<float>(15, 0.2f)), many, open);
  std::vector<float> d(15, 0.2f);
  d[9] = 0.1f;
  const double window = pbm_accuracy(seq(d), {at(7)}, open);
  ok = ok && closed == 100.0 && opened == 0.0 && window == 100.0;
  return {ok, "affine jitter 0 over 100 geometries" + fmt(", closed %.0f%%", closed) +
                  fmt(", open %.0f%%", opened) + fmt(", +-2 fixture %.0f%%", window)};
}

// 10. Stream vs offline equality and C=256 throughput.
Outcome streaming() {
  const StudentNet net({256, 256, 1});
  const AudioTrack track = synth_speech(31, 10.0);
  bool equal = true;
  double rate = 0.0;
  for (bool ensemble : {false, true}) {
    StreamConfig sc;
    sc.ensemble = ensemble;
    StreamEngine engine(net, sc);
    RigSequence out;
    const auto t0 = Clock::now();
    std::size_t pos = 0;
    while (pos < track.samples.size()) {
      const std::size_t n = std::min<std::size_t>(320, track.samples.size() - pos);
      pos += engine.push_audio(std::span<const float>(track.samples).subspan(pos, n));
      while (auto f = engine.next_frame()) out.push_back(f->rig);
    }
    engine.finish();
    while (auto f = engine.next_frame()) out.push_back(f->rig);
    const double elapsed = seconds_since(t0);
    if (!ensemble) rate = double(engine.forward_count()) / elapsed;
    equal = equal && out == offline_inference(net, track, sc);
  }
  return {equal && rate >= 60.0,
          std::string(equal ? "bit identical (plain, ensemble)" : "MISMATCH") +
              fmt(", %.1f frames/s at C=256", rate)};
}

// 11. d = 64 with smoothing.
Outcome latency_ledger() {
  const StudentNet net({16, 64, 1});
  StreamConfig sc;
  sc.ensemble = true;
  StreamEngine engine(net, sc);
  const AudioTrack track = synth_speech(3, 4.0);
  const std::span<const float> audio(track.samples);
  std::size_t pos = 0;
  while (pos < audio.size()) {
    pos += engine.push_audio(audio.subspan(pos, std::min<std::size_t>(320, audio.size() - pos)));
    while (engine.next_frame()) {
    }
  }
  engine.finish();
  while (engine.next_frame()) {
  }
  const LatencyReport r = latency_report(engine);
  const double ledger = r.future_context_ms + r.smoothing_ms;
  return {ledger == 80.7 && std::round(ledger) == 81.0 &&
              r.total_ms == ledger + r.inference_ms_p95,
          fmt("future %.1f", r.future_context_ms) + fmt(" + smoothing %.1f", r.smoothing_ms) +
              fmt(" = %.1f ms", ledger) + fmt(", total with p95 inference %.2f ms", r.total_ms)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app("acceptance checks");
  std::vector<int> only;
  HybridSetup hybrid;
  app.add_option("--only", only, "run only these criteria");
  app.add_option("--hybrid-seeds", hybrid.seeds, "seeds for the hybrid comparison");
  app.add_option("--hybrid-alpha-feat", hybrid.alpha_feat, "feature weight for the hybrid run");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"shape chain", shape_chain},
      {"mac accounting", mac_accounting},
      {"memory accounting", memory_accounting},
      {"gradient checks", gradients},
      {"loss identities", loss_identities},
      {"closed-loop distillation", closed_loop},
      {"hybrid feature supervision", [&] { return hybrid_direction(hybrid); }},
      {"ensemble smoothing", ensemble_smoothing},
      {"metric oracles", metric_oracles},
      {"streaming equivalence and throughput", streaming},
      {"latency ledger", latency_ledger},
  };
  const std::set<int> selected(only.begin(), only.end());
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("criterion %2d %-38s %s  %s\n", id, criteria[i].first.c_str(),
                o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
