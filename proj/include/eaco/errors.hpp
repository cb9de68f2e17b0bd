#pragma once

#include <stdexcept>
#include <string>

namespace eaco {

// Base for everything this library throws. Subtypes map onto the CLI's
// exit-code contract: SchemaError/ValidationError/IoError are input problems,
// BackendError is a backend problem, anything else is a runtime failure.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed input data or configuration (bad JSON, unknown keys, missing
// fields, out-of-range values in files).
class SchemaError : public Error {
 public:
  using Error::Error;
};

// A well-formed value that violates a documented precondition.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Unknown context id, candidate text, style name, or similar.
class LookupError : public Error {
 public:
  using Error::Error;
};

// A judge reply with no extractable total. Keeps the raw text so callers can
// quarantine or log the offending output.
class VerdictParseError : public Error {
 public:
  VerdictParseError(const std::string& what, std::string raw)
      : Error(what), raw_text(std::move(raw)) {}
  std::string raw_text;
};

// A judge reply whose total falls outside the rubric's valid range.
class VerdictRangeError : public Error {
 public:
  VerdictRangeError(const std::string& what, std::string raw, int total)
      : Error(what), raw_text(std::move(raw)), total(total) {}
  std::string raw_text;
  int total = 0;
};

// Transport or protocol failure talking to a generation/judging backend.
class BackendError : public Error {
 public:
  BackendError(const std::string& what, int status = 0, bool retryable = false)
      : Error(what), status(status), retryable(retryable) {}
  int status = 0;
  bool retryable = false;
};

// Raised once the retry budget is spent or the failure is not retryable.
class TerminalBackendError : public BackendError {
 public:
  TerminalBackendError(const std::string& what, int status = 0, int attempts = 1)
      : BackendError(what, status, false), attempts(attempts) {}
  int attempts = 1;
};

}  // namespace eaco
