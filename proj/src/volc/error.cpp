#include "volc/error.hpp"

namespace volc {

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kInvalidShape: return "invalid-shape";
    case ErrorCode::kShape: return "shape";
    case ErrorCode::kInvalidParameter: return "invalid-parameter";
    case ErrorCode::kDegenerateBatch: return "degenerate-batch";
    case ErrorCode::kProfile: return "profile";
    case ErrorCode::kTooSmall: return "too-small";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kMissingClass: return "missing-class";
    case ErrorCode::kFormat: return "format";
    case ErrorCode::kIntegrity: return "integrity";
    case ErrorCode::kChecksum: return "checksum";
    case ErrorCode::kDivergence: return "divergence";
    case ErrorCode::kEmptyInput: return "empty-input";
    case ErrorCode::kUndefinedRate: return "undefined-rate";
    case ErrorCode::kInvalidScore: return "invalid-score";
    case ErrorCode::kInternal: return "internal";
  }
  return "unknown";
}

}  // namespace volc
