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

#ifndef RIGDISTILL_TRAINER_H_
#define RIGDISTILL_TRAINER_H_

#include <cstdint>
#include <string>
#include <vector>

#include "rigdistill/losses.h"
#include "rigdistill/student_net.h"
#include "rigdistill/teacher.h"

namespace rigdistill {

enum class TrainMode { kHeterogeneous, kHybrid, kFinetune };

const char* to_string(TrainMode mode);

struct TrainConfig {
  double learning_rate = 1e-4;
  int epochs = 1;
  std::size_t batch_frames = 32;
  std::size_t subset_count = 1;
  TrainMode mode = TrainMode::kHeterogeneous;
  LossWeights weights;
  std::uint64_t seed = 0;

  // Library-level checks: learning_rate finite and >= 0, epochs >= 1
  // (>= 0 for fine-tuning), batch_frames >= 2, subset_count >= 1.
  void validate() const;
};

struct LossComponents {
  double rec = 0.0;
  double vel = 0.0;
  double feat = 0.0;
  double total = 0.0;
};

struct StepLog {
  std::size_t step = 0;
  int epoch = 0;
  LossComponents loss;
};

struct EpochLog {
  int epoch = 0;
  LossComponents mean;  // over the epoch's steps
};

struct TrainReport {
  std::vector<StepLog> steps;
  std::vector<EpochLog> epochs;
  LossComponents initial;  // whole dataset, before the first step
  LossComponents final;    // whole dataset, after the last step
  std::string checkpoint;

  bool operator==(const TrainReport& other) const;
};

// One minibatch: a contiguous run of frames of one track.
struct Batch {
  std::size_t item = 0;
  std::size_t first_frame = 0;
  std::size_t frames = 0;
};

// All runs of at most batch_frames frames; runs shorter than 2 are dropped.
std::vector<Batch> make_batches(const PseudoLabelDataset& dataset, std::size_t batch_frames);

// Batches of one epoch: the epoch's subset, in seeded shuffled order.
std::vector<Batch> epoch_batches(const PseudoLabelDataset& dataset, const TrainConfig& config,
                                 int epoch);

// Per-frame taps of a frozen network on every labelled frame.
std::vector<std::vector<FeatureTaps>> precompute_taps(const PseudoLabelDataset& dataset,
                                                      const StudentNet& net);

// Frame-weighted loss components over every batch of the dataset. teacher_taps
// may be empty, in which case feat is 0.
LossComponents evaluate_losses(const PseudoLabelDataset& dataset, const StudentNet& student,
                               const TrainConfig& config,
                               const std::vector<std::vector<FeatureTaps>>& teacher_taps = {});

TrainReport train_heterogeneous(const PseudoLabelDataset& dataset, StudentNet& student,
                                const TrainConfig& config);

// The intermediate network sees windows with its own future context; the
// student sees windows with the student's.
TrainReport train_hybrid(const PseudoLabelDataset& dataset, const StudentNet& intermediate,
                         StudentNet& student, const TrainConfig& config);

// Fresh optimizer state; with an intermediate network the feature term is
// included, otherwise the output losses only.
TrainReport finetune(const PseudoLabelDataset& dataset, StudentNet& student,
                     const TrainConfig& config, const StudentNet* intermediate = nullptr);

// step,epoch,rec,vel,feat,total
void write_train_log(const TrainReport& report, const std::string& path);

}  // namespace rigdistill

#endif  // RIGDISTILL_TRAINER_H_
