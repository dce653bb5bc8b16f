#pragma once

#include <stdexcept>
#include <string>

namespace cyclematch {

enum class ErrorCode {
  InvalidArgument = 1,
  Format,
  DimensionMismatch,
  ZeroDegreeNode,
  DegenerateBaseline,
  ConvergenceFailure,
  SingularSystem,
  SinkhornNoConverge,
  NonFiniteLoss,
  StaleCache,
  Spec,
  Io,
};

const char* error_code_name(ErrorCode code) noexcept;

// Every failure raised by the library carries one of the codes above so the
// C API can map it without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace cyclematch
