#pragma once

#include <stdexcept>
#include <string>

namespace osbm {

// Cholesky factorization failed even after jitter escalation.
struct SingularMatrixError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// NaN/Inf detected in the engine state; the message names the iteration and quantity.
struct NonFiniteError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Every (Q, restart) cell of a model-order sweep failed.
struct SelectionFailedError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input file. `line` is 1-based, or -1 when not line-specific.
struct FormatError : std::runtime_error {
  enum class Kind { Io, MalformedLine, SelfLoop, EmptyGraph, BadHeader, BadValue };

  FormatError(Kind k, const std::string& msg, long at_line = -1)
      : std::runtime_error(msg), kind(k), line(at_line) {}

  Kind kind;
  long line;
};

const char* format_error_kind_name(FormatError::Kind kind);

}  // namespace osbm
