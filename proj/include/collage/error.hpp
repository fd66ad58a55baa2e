#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace collage {

using NodeId = std::int64_t;

enum class ErrorCode {
  kParse,       // malformed text / JSON
  kValidation,  // well-formed input violating an invariant
  kNotFound,    // unknown id, missing file
  kInfeasible,  // no placement covers the graph
  kMeasure,     // measurer cannot cost a kernel
  kCapacity,    // size cap exceeded
  kInvariant,   // internal consistency check failed
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kParse: return "parse_error";
    case ErrorCode::kValidation: return "validation_error";
    case ErrorCode::kNotFound: return "not_found";
    case ErrorCode::kInfeasible: return "infeasible";
    case ErrorCode::kMeasure: return "measure_error";
    case ErrorCode::kCapacity: return "capacity_exceeded";
    case ErrorCode::kInvariant: return "invariant_violation";
  }
  return "unknown";
}

/// The single exception type thrown by the library. Carries the offending
/// node ids (if any) and, for text parsers, a 1-based line/column.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::vector<NodeId> nodes = {})
      : std::runtime_error(message), code_(code), nodes_(std::move(nodes)) {}

  Error(ErrorCode code, const std::string& message, int line, int column)
      : std::runtime_error(message + " at line " + std::to_string(line) + ", column " +
                           std::to_string(column)),
        code_(code),
        line_(line),
        column_(column) {}

  ErrorCode code() const noexcept { return code_; }
  const std::vector<NodeId>& nodes() const noexcept { return nodes_; }
  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }

 private:
  ErrorCode code_;
  std::vector<NodeId> nodes_;
  int line_ = 0;
  int column_ = 0;
};

}  // namespace collage
