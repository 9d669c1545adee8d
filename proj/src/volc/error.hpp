#pragma once

#include <stdexcept>
#include <string>

namespace volc {

enum class ErrorCode {
  kInvalidShape,
  kShape,
  kInvalidParameter,
  kDegenerateBatch,
  kProfile,
  kTooSmall,
  kParse,
  kIo,
  kMissingClass,
  kFormat,
  kIntegrity,
  kChecksum,
  kDivergence,
  kEmptyInput,
  kUndefinedRate,
  kInvalidScore,
  kInternal,
};

const char* error_code_name(ErrorCode code) noexcept;

// Every domain failure in the library is reported through this type; the C
// API maps `code()` onto its status enum one to one.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace volc
