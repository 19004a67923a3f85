#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace catchphrase {

enum class ErrorCode {
  kDimensionMismatch,
  kZeroVector,
  kNonFiniteValue,
  kCorruptManifest,
  kDimMismatch,
  kTruncatedVectorFile,
  kIo,
  kEmptyLabel,
  kMissingEmbedding,
  kEmptyClass,
  kEmptyFilteredClass,
  kOutOfRange,
  kInvalidStep,
  kMissingAssignment,
  kClassMismatch,
  kNoNegativesAvailable,
  kNonFiniteLoss,
  kInvalidConfig,
  kIdMismatch,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kZeroVector: return "ZeroVector";
    case ErrorCode::kNonFiniteValue: return "NonFiniteValue";
    case ErrorCode::kCorruptManifest: return "CorruptManifest";
    case ErrorCode::kDimMismatch: return "DimMismatch";
    case ErrorCode::kTruncatedVectorFile: return "TruncatedVectorFile";
    case ErrorCode::kIo: return "Io";
    case ErrorCode::kEmptyLabel: return "EmptyLabel";
    case ErrorCode::kMissingEmbedding: return "MissingEmbedding";
    case ErrorCode::kEmptyClass: return "EmptyClass";
    case ErrorCode::kEmptyFilteredClass: return "EmptyFilteredClass";
    case ErrorCode::kOutOfRange: return "OutOfRange";
    case ErrorCode::kInvalidStep: return "InvalidStep";
    case ErrorCode::kMissingAssignment: return "MissingAssignment";
    case ErrorCode::kClassMismatch: return "ClassMismatch";
    case ErrorCode::kNoNegativesAvailable: return "NoNegativesAvailable";
    case ErrorCode::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kIdMismatch: return "IdMismatch";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the ErrorCode values so
/// callers (the CLI in particular) can map it to an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace catchphrase
