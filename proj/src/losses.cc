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

#include "rigdistill/losses.h"

#include <cmath>
#include <span>
#include <string>

#include "rigdistill/error.h"
#include "rigdistill/kernels.h"

namespace rigdistill {

void LossWeights::validate() const {
  auto check = [](double v, const char* name) {
    if (!std::isfinite(v) || v < 0.0) {
      fail(ErrorKind::kValidation, std::string(name) + " must be finite and >= 0");
    }
  };
  check(alpha_rec, "alpha_rec");
  check(alpha_vel, "alpha_vel");
  check(alpha_feat, "alpha_feat");
}

namespace {

void check_pair(const RigSequence& a, const RigSequence& b, const char* what) {
  if (a.size() != b.size()) {
    fail(ErrorKind::kShape, std::string(what) + ": " + std::to_string(a.size()) +
                                " frames vs " + std::to_string(b.size()));
  }
}

std::span<const float> flat(const RigSequence& s) {
  return {s.empty() ? nullptr : s.front().data(), s.size() * kRigDims};
}

template <std::size_t N>
double tap_distance(const std::vector<FeatureTaps>& a, const std::vector<FeatureTaps>& b,
                    std::array<float, N> FeatureTaps::*member) {
  double total = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    const auto& x = a[t].*member;
    const auto& y = b[t].*member;
    for (std::size_t i = 0; i < N; ++i) {
      const double d = static_cast<double>(x[i]) - static_cast<double>(y[i]);
      total += d * d;
    }
  }
  return total / static_cast<double>(a.size());
}

}  // namespace

double loss_rec(const RigSequence& pred, const RigSequence& target) {
  check_pair(pred, target, "loss_rec");
  if (pred.empty()) fail(ErrorKind::kShape, "loss_rec needs at least one frame");
  return kernels::mean_row_sq_dist<float>(pred.size(), kRigDims, flat(pred), flat(target));
}

double loss_vel(const RigSequence& pred, const RigSequence& target) {
  check_pair(pred, target, "loss_vel");
  if (pred.size() < 2) fail(ErrorKind::kShape, "loss_vel needs at least two frames");
  return kernels::mean_velocity_sq_dist<float>(pred.size(), kRigDims, flat(pred),
                                               flat(target));
}

double loss_feat(const std::vector<FeatureTaps>& teacher,
                 const std::vector<FeatureTaps>& student) {
  if (teacher.size() != student.size()) {
    fail(ErrorKind::kShape, "loss_feat: tap sequences differ in length");
  }
  if (teacher.empty()) fail(ErrorKind::kShape, "loss_feat needs at least one frame");
  return tap_distance(teacher, student, &FeatureTaps::f1) +
         tap_distance(teacher, student, &FeatureTaps::f2) +
         tap_distance(teacher, student, &FeatureTaps::f3);
}

double total_loss(double rec, double vel, double feat, const LossWeights& weights) {
  return weights.alpha_rec * rec + weights.alpha_vel * vel + weights.alpha_feat * feat;
}

}  // namespace rigdistill
