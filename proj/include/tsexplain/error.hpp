#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tsexplain {

enum class ErrorCode {
  kEmptyInput,
  kRaggedRows,
  kNonNumeric,
  kShapeMismatch,
  kNonFiniteLoss,
  kNonFinite,
  kManifestParse,
  kUnknownLayerKind,
  kInvalidArgument,
  kDegenerateDesign,
  kIndexOutOfRange,
  kMissingAttributions,
  kInvalidParams,
  kPerplexityTooLarge,
  kDimensionMismatch,
  kNoUnlikeNeighbor,
  kNoFlipWithinBudget,
  kMissingContext,
  kUnknownMethod,
  kInvalidConfig,
  kFileNotFound,
  kNotFound,
  kNotDone,
};

std::string_view error_code_name(ErrorCode code);

// Every engine failure is reported through this type; `code()` is what the
// HTTP layer and the session status record expose.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  std::string_view code_name() const { return error_code_name(code_); }

 private:
  ErrorCode code_;
};

}  // namespace tsexplain
