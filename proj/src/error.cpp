#include "tsexplain/error.hpp"

namespace tsexplain {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kRaggedRows: return "RaggedRows";
    case ErrorCode::kNonNumeric: return "NonNumeric";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::kNonFinite: return "NonFinite";
    case ErrorCode::kManifestParse: return "ManifestParse";
    case ErrorCode::kUnknownLayerKind: return "UnknownLayerKind";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kDegenerateDesign: return "DegenerateDesign";
    case ErrorCode::kIndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::kMissingAttributions: return "MissingAttributions";
    case ErrorCode::kInvalidParams: return "InvalidParams";
    case ErrorCode::kPerplexityTooLarge: return "PerplexityTooLarge";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kNoUnlikeNeighbor: return "NoUnlikeNeighbor";
    case ErrorCode::kNoFlipWithinBudget: return "NoFlipWithinBudget";
    case ErrorCode::kMissingContext: return "MissingContext";
    case ErrorCode::kUnknownMethod: return "UnknownMethod";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kFileNotFound: return "FileNotFound";
    case ErrorCode::kNotFound: return "NotFound";
    case ErrorCode::kNotDone: return "NotDone";
  }
  return "Unknown";
}

}  // namespace tsexplain
