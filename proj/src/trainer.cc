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

#include "rigdistill/trainer.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>

#include "rigdistill/adam.h"
#include "rigdistill/error.h"
#include "rigdistill/graph.h"

namespace rigdistill {

const char* to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::kHeterogeneous: return "heterogeneous";
    case TrainMode::kHybrid: return "hybrid";
    case TrainMode::kFinetune: return "finetune";
  }
  return "unknown";
}

void TrainConfig::validate() const {
  if (!std::isfinite(learning_rate) || learning_rate < 0.0) {
    fail(ErrorKind::kValidation, "learning_rate must be finite and >= 0");
  }
  const int min_epochs = mode == TrainMode::kFinetune ? 0 : 1;
  if (epochs < min_epochs) {
    fail(ErrorKind::kValidation, "epochs must be >= " + std::to_string(min_epochs));
  }
  if (batch_frames < 2) fail(ErrorKind::kValidation, "batch_frames must be >= 2");
  if (subset_count < 1) fail(ErrorKind::kValidation, "subset_count must be >= 1");
  weights.validate();
}

namespace {

bool same(const LossComponents& a, const LossComponents& b) {
  return a.rec == b.rec && a.vel == b.vel && a.feat == b.feat && a.total == b.total;
}

void require_mode(const TrainConfig& config, TrainMode mode) {
  if (config.mode != mode) {
    fail(ErrorKind::kValidation, std::string("training config mode is '") +
                                     to_string(config.mode) + "', expected '" +
                                     to_string(mode) + "'");
  }
}

void require_data(const PseudoLabelDataset& dataset) {
  if (dataset.items.empty()) fail(ErrorKind::kEmptyInput, "dataset is empty");
  for (const auto& item : dataset.items) {
    if (!item.audio) {
      fail(ErrorKind::kInvalidArgument, "no audio attached for labelled track " + item.path);
    }
  }
}

Tensor<float> window_tensor(const AudioTrack& audio, std::size_t frame, int future_ms) {
  Tensor<float> w({1, kWindowSamples});
  copy_window(audio.samples, window_start(static_cast<std::int64_t>(frame), future_ms),
              w.data());
  return w;
}

Tensor<float> label_matrix(const LabeledTrack& item, const Batch& b) {
  Tensor<float> t({b.frames, kRigDims});
  for (std::size_t i = 0; i < b.frames; ++i) {
    const RigFrame& f = item.frames[b.first_frame + i];
    std::copy(f.begin(), f.end(), t.data().begin() + i * kRigDims);
  }
  return t;
}

template <std::size_t N>
Tensor<float> tap_matrix(const std::vector<FeatureTaps>& taps, const Batch& b,
                         std::array<float, N> FeatureTaps::*member) {
  Tensor<float> t({b.frames, N});
  for (std::size_t i = 0; i < b.frames; ++i) {
    const auto& src = taps[b.first_frame + i].*member;
    std::copy(src.begin(), src.end(), t.data().begin() + i * N);
  }
  return t;
}

template <std::size_t N>
void copy_tap(const Tensor<float>& value, std::array<float, N>& out) {
  std::copy(value.data().begin(), value.data().end(), out.begin());
}

LossComponents train_step(const PseudoLabelDataset& dataset, StudentNet& student,
                          const TrainConfig& config,
                          const std::vector<std::vector<FeatureTaps>>& teacher_taps,
                          const Batch& batch, Adam<float>& adam) {
  const LabeledTrack& item = dataset.items[batch.item];
  ParameterStore<float>& params = student.parameters();
  params.zero_grad();
  Graph<float> graph(&params);
  const auto ids = bind_parameters(graph, params);
  std::vector<NodeId> rig, f1, f2, f3;
  for (std::size_t i = 0; i < batch.frames; ++i) {
    const NodeId x = graph.input(
        window_tensor(*item.audio, batch.first_frame + i, student.config().future_ms));
    const StudentNodes nodes = build_student_graph(graph, student.plan(), ids, x);
    rig.push_back(nodes.rig);
    f1.push_back(nodes.f1);
    f2.push_back(nodes.f2);
    f3.push_back(nodes.f3);
  }
  const NodeId pred = graph.stack(rig);
  const NodeId target = graph.input(label_matrix(item, batch));
  const NodeId rec = graph.row_sq_dist(pred, target);
  const NodeId vel = graph.velocity_sq_dist(pred, target);
  std::vector<NodeId> terms{rec, vel};
  std::vector<double> weights{config.weights.alpha_rec, config.weights.alpha_vel};

  LossComponents out;
  out.rec = graph.scalar(rec);
  out.vel = graph.scalar(vel);
  if (!teacher_taps.empty()) {
    const auto& taps = teacher_taps[batch.item];
    std::vector<FeatureTaps> student_taps(batch.frames);
    for (std::size_t i = 0; i < batch.frames; ++i) {
      copy_tap(graph.value(f1[i]), student_taps[i].f1);
      copy_tap(graph.value(f2[i]), student_taps[i].f2);
      copy_tap(graph.value(f3[i]), student_taps[i].f3);
    }
    out.feat = loss_feat(
        std::vector<FeatureTaps>(taps.begin() + static_cast<std::ptrdiff_t>(batch.first_frame),
                                 taps.begin() + static_cast<std::ptrdiff_t>(batch.first_frame +
                                                                            batch.frames)),
        student_taps);
    if (config.weights.alpha_feat > 0.0) {
      const NodeId d1 = graph.row_sq_dist(graph.stack(f1),
                                          graph.input(tap_matrix(taps, batch, &FeatureTaps::f1)));
      const NodeId d2 = graph.row_sq_dist(graph.stack(f2),
                                          graph.input(tap_matrix(taps, batch, &FeatureTaps::f2)));
      const NodeId d3 = graph.row_sq_dist(graph.stack(f3),
                                          graph.input(tap_matrix(taps, batch, &FeatureTaps::f3)));
      terms.push_back(graph.weighted_sum({d1, d2, d3}, {1.0, 1.0, 1.0}));
      weights.push_back(config.weights.alpha_feat);
    }
  }
  const NodeId total = graph.weighted_sum(terms, weights);
  graph.backward(total);
  adam.step(params);
  out.total = total_loss(out.rec, out.vel, out.feat, config.weights);
  return out;
}

TrainReport train_loop(const PseudoLabelDataset& dataset, StudentNet& student,
                       const TrainConfig& config, const StudentNet* intermediate) {
  config.validate();
  require_data(dataset);
  const auto teacher_taps =
      intermediate ? precompute_taps(dataset, *intermediate)
                   : std::vector<std::vector<FeatureTaps>>{};
  TrainReport report;
  report.initial = evaluate_losses(dataset, student, config, teacher_taps);
  AdamConfig adam_config;
  adam_config.learning_rate = config.learning_rate;
  Adam<float> adam(adam_config);
  std::size_t step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    LossComponents sum;
    std::size_t count = 0;
    for (const Batch& batch : epoch_batches(dataset, config, epoch)) {
      const LossComponents loss = train_step(dataset, student, config, teacher_taps, batch, adam);
      report.steps.push_back({step++, epoch, loss});
      sum.rec += loss.rec;
      sum.vel += loss.vel;
      sum.feat += loss.feat;
      sum.total += loss.total;
      ++count;
    }
    EpochLog log;
    log.epoch = epoch;
    if (count > 0) {
      const double n = static_cast<double>(count);
      log.mean = {sum.rec / n, sum.vel / n, sum.feat / n, sum.total / n};
    }
    report.epochs.push_back(log);
  }
  report.final = evaluate_losses(dataset, student, config, teacher_taps);
  return report;
}

}  // namespace

bool TrainReport::operator==(const TrainReport& other) const {
  if (steps.size() != other.steps.size() || epochs.size() != other.epochs.size()) return false;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (steps[i].step != other.steps[i].step || steps[i].epoch != other.steps[i].epoch ||
        !same(steps[i].loss, other.steps[i].loss)) {
      return false;
    }
  }
  for (std::size_t i = 0; i < epochs.size(); ++i) {
    if (epochs[i].epoch != other.epochs[i].epoch || !same(epochs[i].mean, other.epochs[i].mean)) {
      return false;
    }
  }
  return same(initial, other.initial) && same(final, other.final) &&
         checkpoint == other.checkpoint;
}

std::vector<Batch> make_batches(const PseudoLabelDataset& dataset, std::size_t batch_frames) {
  if (batch_frames < 2) fail(ErrorKind::kValidation, "batch_frames must be >= 2");
  std::vector<Batch> batches;
  for (std::size_t i = 0; i < dataset.items.size(); ++i) {
    const std::size_t n = dataset.items[i].frames.size();
    for (std::size_t start = 0; start < n; start += batch_frames) {
      const std::size_t len = std::min(batch_frames, n - start);
      if (len >= 2) batches.push_back({i, start, len});
    }
  }
  return batches;
}

std::vector<Batch> epoch_batches(const PseudoLabelDataset& dataset, const TrainConfig& config,
                                 int epoch) {
  std::vector<Batch> all = make_batches(dataset, config.batch_frames);
  std::vector<Batch> chosen;
  if (config.subset_count > 1) {
    std::vector<std::size_t> order(dataset.items.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 shard_rng(config.seed);
    std::shuffle(order.begin(), order.end(), shard_rng);
    std::vector<std::size_t> shard(dataset.items.size());
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
      shard[order[pos]] = pos % config.subset_count;
    }
    const std::size_t active = static_cast<std::size_t>(epoch) % config.subset_count;
    for (const Batch& b : all) {
      if (shard[b.item] == active) chosen.push_back(b);
    }
  } else {
    chosen = std::move(all);
  }
  std::mt19937_64 rng(config.seed + 1 + static_cast<std::uint64_t>(epoch));
  std::shuffle(chosen.begin(), chosen.end(), rng);
  return chosen;
}

std::vector<std::vector<FeatureTaps>> precompute_taps(const PseudoLabelDataset& dataset,
                                                      const StudentNet& net) {
  require_data(dataset);
  std::vector<std::vector<FeatureTaps>> taps(dataset.items.size());
  std::vector<float> window(kWindowSamples);
  for (std::size_t i = 0; i < dataset.items.size(); ++i) {
    const auto& item = dataset.items[i];
    taps[i].resize(item.frames.size());
    for (std::size_t k = 0; k < item.frames.size(); ++k) {
      copy_window(item.audio->samples,
                  window_start(static_cast<std::int64_t>(k), net.config().future_ms), window);
      taps[i][k] = net.forward_with_taps(window).second;
    }
  }
  return taps;
}

LossComponents evaluate_losses(const PseudoLabelDataset& dataset, const StudentNet& student,
                               const TrainConfig& config,
                               const std::vector<std::vector<FeatureTaps>>& teacher_taps) {
  require_data(dataset);
  double rec = 0.0, vel = 0.0, feat = 0.0;
  std::size_t frames = 0, steps = 0;
  std::vector<float> window(kWindowSamples);
  for (const Batch& b : make_batches(dataset, config.batch_frames)) {
    const auto& item = dataset.items[b.item];
    RigSequence pred(b.frames), target(b.frames);
    std::vector<FeatureTaps> taps(b.frames), reference(b.frames);
    for (std::size_t i = 0; i < b.frames; ++i) {
      const std::size_t k = b.first_frame + i;
      copy_window(item.audio->samples,
                  window_start(static_cast<std::int64_t>(k), student.config().future_ms),
                  window);
      auto [r, t] = student.forward_with_taps(window);
      pred[i] = r;
      taps[i] = t;
      target[i] = item.frames[k];
      if (!teacher_taps.empty()) reference[i] = teacher_taps[b.item][k];
    }
    rec += loss_rec(pred, target) * static_cast<double>(b.frames);
    vel += loss_vel(pred, target) * static_cast<double>(b.frames - 1);
    if (!teacher_taps.empty()) feat += loss_feat(reference, taps) * static_cast<double>(b.frames);
    frames += b.frames;
    steps += b.frames - 1;
  }
  LossComponents out;
  if (frames > 0) {
    out.rec = rec / static_cast<double>(frames);
    out.vel = vel / static_cast<double>(steps);
    out.feat = feat / static_cast<double>(frames);
  }
  out.total = total_loss(out.rec, out.vel, out.feat, config.weights);
  return out;
}

TrainReport train_heterogeneous(const PseudoLabelDataset& dataset, StudentNet& student,
                                const TrainConfig& config) {
  require_mode(config, TrainMode::kHeterogeneous);
  return train_loop(dataset, student, config, nullptr);
}

TrainReport train_hybrid(const PseudoLabelDataset& dataset, const StudentNet& intermediate,
                         StudentNet& student, const TrainConfig& config) {
  require_mode(config, TrainMode::kHybrid);
  return train_loop(dataset, student, config, &intermediate);
}

TrainReport finetune(const PseudoLabelDataset& dataset, StudentNet& student,
                     const TrainConfig& config, const StudentNet* intermediate) {
  require_mode(config, TrainMode::kFinetune);
  return train_loop(dataset, student, config, intermediate);
}

void write_train_log(const TrainReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot create " + path);
  out << "step,epoch,rec,vel,feat,total\n" << std::setprecision(17);
  for (const StepLog& s : report.steps) {
    out << s.step << ',' << s.epoch << ',' << s.loss.rec << ',' << s.loss.vel << ','
        << s.loss.feat << ',' << s.loss.total << '\n';
  }
  if (!out) fail(ErrorKind::kIo, "write error on " + path);
}

}  // namespace rigdistill
