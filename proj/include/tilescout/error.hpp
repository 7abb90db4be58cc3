// Copyright 2026 The tilescout Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tilescout {

/// Stable error categories. The service maps each one to an HTTP status and
/// reports the token from error_code_token() in error bodies.
enum class ErrorCode {
  kInvalidArgument,
  kParseError,
  kUnknownModel,
  kUnsupportedModality,
  kDimensionMismatch,
  kNonFinite,
  kNotFound,
  kChecksumMismatch,
  kCorruptData,
  kIoError,
  kEncoderTimeout,
  kEncoderHttp,
  kEncoderMalformed,
  kEncoderFailure,
  kCorpusNotLoaded,
  kEmptyCorpus,
};

std::string_view error_code_token(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace tilescout
