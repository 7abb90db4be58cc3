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

#include "tilescout/error.hpp"

namespace tilescout {

std::string_view error_code_token(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kParseError: return "parse_error";
    case ErrorCode::kUnknownModel: return "unknown_model";
    case ErrorCode::kUnsupportedModality: return "unsupported_modality";
    case ErrorCode::kDimensionMismatch: return "dimension_mismatch";
    case ErrorCode::kNonFinite: return "non_finite";
    case ErrorCode::kNotFound: return "not_found";
    case ErrorCode::kChecksumMismatch: return "checksum_mismatch";
    case ErrorCode::kCorruptData: return "corrupt_data";
    case ErrorCode::kIoError: return "io_error";
    case ErrorCode::kEncoderTimeout: return "encoder_timeout";
    case ErrorCode::kEncoderHttp: return "encoder_http";
    case ErrorCode::kEncoderMalformed: return "encoder_malformed";
    case ErrorCode::kEncoderFailure: return "encoder_failure";
    case ErrorCode::kCorpusNotLoaded: return "corpus_not_loaded";
    case ErrorCode::kEmptyCorpus: return "empty_corpus";
  }
  return "internal";
}

}  // namespace tilescout
