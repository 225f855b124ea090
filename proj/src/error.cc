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

#include "rigdistill/error.h"

namespace rigdistill {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kShape: return "shape";
    case ErrorKind::kNonFinite: return "non_finite";
    case ErrorKind::kInvalidArgument: return "invalid_argument";
    case ErrorKind::kNotScalar: return "not_scalar";
    case ErrorKind::kIo: return "io";
    case ErrorKind::kMalformed: return "malformed";
    case ErrorKind::kVersion: return "version";
    case ErrorKind::kTruncated: return "truncated";
    case ErrorKind::kSampleRate: return "sample_rate";
    case ErrorKind::kChannelCount: return "channel_count";
    case ErrorKind::kUnsupportedEncoding: return "unsupported_encoding";
    case ErrorKind::kEmptyInput: return "empty_input";
    case ErrorKind::kWeights: return "weights";
    case ErrorKind::kNoPbmFrames: return "no_pbm_frames";
    case ErrorKind::kTooFewFrames: return "too_few_frames";
    case ErrorKind::kAudioGap: return "audio_gap";
    case ErrorKind::kValidation: return "validation";
    case ErrorKind::kInternal: return "internal";
  }
  return "unknown";
}

void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace rigdistill
