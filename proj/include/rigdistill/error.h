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

#ifndef RIGDISTILL_ERROR_H_
#define RIGDISTILL_ERROR_H_

#include <stdexcept>
#include <string>

namespace rigdistill {

enum class ErrorKind {
  kShape,
  kNonFinite,
  kInvalidArgument,
  kNotScalar,
  kIo,
  kMalformed,
  kVersion,
  kTruncated,
  kSampleRate,
  kChannelCount,
  kUnsupportedEncoding,
  kEmptyInput,
  kWeights,
  kNoPbmFrames,
  kTooFewFrames,
  kAudioGap,
  kValidation,
  kInternal,
};

const char* to_string(ErrorKind kind);

// All library failures surface as this type; kind() is stable for callers
// that need to branch, what() carries the human-readable detail.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

}  // namespace rigdistill

#endif  // RIGDISTILL_ERROR_H_
