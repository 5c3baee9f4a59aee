// Copyright 2026 The Capscore Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
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

namespace capscore {

enum class ErrorCode {
  kEmptyCaption,
  kNoReferences,
  kEmptyCorpus,
  kMissingDFOrder,
  kDimensionMismatch,
  kZeroNormVector,
  kFormatError,
  kDuplicateKey,
  kMissingEmbedding,
  kAllTokensOOV,
  kNumericalFailure,
  kInsufficientCorpus,
  kDegenerateRange,
  kEmptyBucket,
  kParseError,
  kDuplicateItem,
  kUnknownItem,
  kDuplicateCandidate,
  kInvalidArgument,
  kIoError,
};

constexpr std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kEmptyCaption: return "EmptyCaption";
    case ErrorCode::kNoReferences: return "NoReferences";
    case ErrorCode::kEmptyCorpus: return "EmptyCorpus";
    case ErrorCode::kMissingDFOrder: return "MissingDFOrder";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kZeroNormVector: return "ZeroNormVector";
    case ErrorCode::kFormatError: return "FormatError";
    case ErrorCode::kDuplicateKey: return "DuplicateKey";
    case ErrorCode::kMissingEmbedding: return "MissingEmbedding";
    case ErrorCode::kAllTokensOOV: return "AllTokensOOV";
    case ErrorCode::kNumericalFailure: return "NumericalFailure";
    case ErrorCode::kInsufficientCorpus: return "InsufficientCorpus";
    case ErrorCode::kDegenerateRange: return "DegenerateRange";
    case ErrorCode::kEmptyBucket: return "EmptyBucket";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kDuplicateItem: return "DuplicateItem";
    case ErrorCode::kUnknownItem: return "UnknownItem";
    case ErrorCode::kDuplicateCandidate: return "DuplicateCandidate";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (the CLI in particular) can map it to an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message),
        code_(code),
        message_(message) {}

  ErrorCode code() const noexcept { return code_; }
  // The message without the code prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

}  // namespace capscore
