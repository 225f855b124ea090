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

#ifndef RIGDISTILL_CHECKPOINT_H_
#define RIGDISTILL_CHECKPOINT_H_

#include <cstdint>
#include <string>

#include "rigdistill/student_net.h"

namespace rigdistill {

// Little-endian: "RDCK", version, C, d_ms, tensor count, then per tensor
// name length + UTF-8 name, rank, extents, float32 values.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const StudentNet& net, const std::string& path);
StudentNet load_checkpoint(const std::string& path);

std::vector<std::uint8_t> encode_checkpoint(const StudentNet& net);
StudentNet decode_checkpoint(const std::vector<std::uint8_t>& bytes,
                             const std::string& origin = "checkpoint");

}  // namespace rigdistill

#endif  // RIGDISTILL_CHECKPOINT_H_
