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

#ifndef RIGDISTILL_EVALUATE_H_
#define RIGDISTILL_EVALUATE_H_

#include <string>
#include <vector>

#include "rigdistill/metrics.h"
#include "rigdistill/realtime.h"
#include "rigdistill/student_net.h"
#include "rigdistill/teacher.h"

namespace rigdistill {

struct EvalCorpus {
  PseudoLabelDataset labels;             // audio attached
  std::vector<PhonemeIntervals> intervals;  // one per label item
  LipGeometry geometry;
};

// Intervals for "name.wav" are read from "name.tsv" next to it.
EvalCorpus load_eval_corpus(const std::string& corpus_dir, const std::string& labels_path,
                            const std::string& geometry_path);

struct EvalOptions {
  std::string model = "student";
  StreamConfig stream;
  double threshold = kPbmThreshold;
  std::size_t tolerance_frames = kPbmTolerance;
};

struct EvalReport {
  std::string model;
  std::size_t channels = 0;
  int future_ms = 0;
  std::string mode;  // plain or ensemble
  double mse = 0.0;
  double pbm_accuracy = 0.0;
  double jitter = 0.0;
  ResourceReport resources;
  LatencyReport latency;
};

// Runs every track through the streaming engine, then scores the outputs.
EvalReport evaluate(const StudentNet& net, const EvalCorpus& corpus, const EvalOptions& options);

std::string eval_csv_header();
std::string eval_csv_row(const EvalReport& report);
void write_eval_csv(const std::vector<EvalReport>& reports, const std::string& path);

}  // namespace rigdistill

#endif  // RIGDISTILL_EVALUATE_H_
