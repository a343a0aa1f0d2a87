// Copyright 2026 The micarray Authors
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

namespace micarray {

enum class ErrorCode {
  kDimensionMismatch,
  kNonOrthonormal,
  kDegenerateGeometry,
  kDegenerateTiming,
  kDegenerateTriangulation,
  kDegenerateRegistration,
  kInsufficientSteps,
  kSolverFailure,
  kAllOutliers,
  kSingularNormalEquations,
  kInvalidSpec,
  kParseError,
  kSchemaMismatch,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so the
/// CLI can map it to an exit status without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code),
        message_(what) {}

  ErrorCode code() const noexcept { return code_; }

  /// what() without the code prefix.
  const std::string& message() const noexcept { return message_; }

  /// True for failures caused by the input geometry or timing rather than by
  /// malformed files or programming errors.
  bool is_degenerate_input() const noexcept;

 private:
  ErrorCode code_;
  std::string message_;
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kNonOrthonormal: return "NonOrthonormal";
    case ErrorCode::kDegenerateGeometry: return "DegenerateGeometry";
    case ErrorCode::kDegenerateTiming: return "DegenerateTiming";
    case ErrorCode::kDegenerateTriangulation: return "DegenerateTriangulation";
    case ErrorCode::kDegenerateRegistration: return "DegenerateRegistration";
    case ErrorCode::kInsufficientSteps: return "InsufficientSteps";
    case ErrorCode::kSolverFailure: return "SolverFailure";
    case ErrorCode::kAllOutliers: return "AllOutliers";
    case ErrorCode::kSingularNormalEquations: return "SingularNormalEquations";
    case ErrorCode::kInvalidSpec: return "InvalidSpec";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kSchemaMismatch: return "SchemaMismatch";
  }
  return "Unknown";
}

inline bool Error::is_degenerate_input() const noexcept {
  switch (code_) {
    case ErrorCode::kDegenerateGeometry:
    case ErrorCode::kDegenerateTiming:
    case ErrorCode::kDegenerateTriangulation:
    case ErrorCode::kDegenerateRegistration:
    case ErrorCode::kInsufficientSteps:
    case ErrorCode::kAllOutliers:
    case ErrorCode::kSolverFailure:
      return true;
    default:
      return false;
  }
}

}  // namespace micarray
