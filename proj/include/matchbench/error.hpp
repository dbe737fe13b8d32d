#pragma once

#include <stdexcept>
#include <string>

namespace matchbench {

// Every failure surfaced by the library carries one of these kinds so the CLI
// can map it onto an exit code without string matching.
enum class ErrorKind {
  ManifestNotFound,
  SchemaError,
  TruthError,
  DegenerateInput,
  UnknownMetric,
  EmptyTruth,
  TemplateError,
  AuthError,
  RateLimitExhausted,
  TransportError,
  BudgetExceeded,
  StoreCorrupt,
  DatasetMismatch,
  InsufficientRuns,
  RunCountMismatch,
  InvalidArgument,
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace matchbench
