#pragma once

#include <stdexcept>
#include <string>

namespace replica_sync {

enum class ErrorCode {
  InvalidInput,          // mismatched or malformed arguments
  NotEnumerable,         // element enumeration requested for a continuous family
  Inapplicable,          // operation requires a structural property the input lacks
  UnsupportedInput,      // reducible construction outside the built-in catalog
  ClassificationNeeded,  // a determinate representation type is required
  BudgetExceeded,        // enumeration or sampling budget exceeded
  Internal,              // invariant violated inside the library
};

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

}  // namespace replica_sync
