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

#ifndef RIGDISTILL_LOSSES_H_
#define RIGDISTILL_LOSSES_H_

#include <vector>

#include "rigdistill/student_net.h"
#include "rigdistill/types.h"

namespace rigdistill {

struct LossWeights {
  double alpha_rec = 0.1;
  double alpha_vel = 0.9;
  double alpha_feat = 0.1;

  void validate() const;
};

// Mean over frames of |pred_t - target_t|^2.
double loss_rec(const RigSequence& pred, const RigSequence& target);
// Mean over t >= 1 of |(pred_t - pred_{t-1}) - (target_t - target_{t-1})|^2.
double loss_vel(const RigSequence& pred, const RigSequence& target);
// Sum over the three taps of the frame-averaged squared distance.
double loss_feat(const std::vector<FeatureTaps>& teacher,
                 const std::vector<FeatureTaps>& student);
double total_loss(double rec, double vel, double feat, const LossWeights& weights);

}  // namespace rigdistill

#endif  // RIGDISTILL_LOSSES_H_
