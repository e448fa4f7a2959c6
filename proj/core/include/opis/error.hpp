#pragma once

#include <stdexcept>
#include <string>

namespace opis {

/// Raised when a caller violates an operation's precondition.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when internal bookkeeping is inconsistent (a bug, not bad input).
class InternalError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Raised when training produces a non-finite loss. `what()` carries a
/// snapshot of the offending iteration.
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool ok, const std::string& message) {
  if (!ok) throw InvalidInput(message);
}

}  // namespace detail
}  // namespace opis
