#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dyadlab {

// Machine-readable error categories, also used by the CLI for exit codes.
enum class ErrorCategory {
  Specification,   // invalid inputs or mismatched shapes
  Incomplete,      // aggregation over a grid with missing cells
  Ingestion,       // human data that does not fit the declared schema
  Transport,       // endpoint unreachable, HTTP failure, timeout (retriable)
  Protocol,        // malformed response body
  State,           // corrupt or missing run state
  Aborted,         // run stopped by the per-slot attempt cap
  Io,
};

inline std::string_view to_string(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::Specification: return "specification";
    case ErrorCategory::Incomplete: return "incomplete";
    case ErrorCategory::Ingestion: return "ingestion";
    case ErrorCategory::Transport: return "transport";
    case ErrorCategory::Protocol: return "protocol";
    case ErrorCategory::State: return "state";
    case ErrorCategory::Aborted: return "aborted";
    case ErrorCategory::Io: return "io";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}
  ErrorCategory category() const noexcept { return category_; }
  bool retriable() const noexcept { return category_ == ErrorCategory::Transport; }

 private:
  ErrorCategory category_;
};

inline Error specification_error(const std::string& what) {
  return Error(ErrorCategory::Specification, what);
}

}  // namespace dyadlab
