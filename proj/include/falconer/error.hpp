#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace falconer {

/// Failure classes raised by the library. Each maps onto one CLI exit code.
enum class ErrorCode {
  // corpus
  MalformedLine,
  DuplicateId,
  EmptyCorpus,
  InvalidFraction,
  // plan-ir
  SchemaError,
  InvalidPlan,
  EmptyInstruction,
  // planner
  NoJsonFound,
  PlanInvalidAfterRepairs,
  MissingGolden,
  // primitives
  EmptyLabel,
  MalformedBio,
  UnalignedSpan,
  OverlappingSpans,
  BadSplit,
  // backends
  BackendUnavailable,
  ProtocolError,
  // generator
  CorpusTooSmall,
  SampleTooLarge,
  WrongKind,
  // executor
  UnboundBackend,
  MismatchedRuns,
  // eval
  UnknownRecord,
  PlanMismatch,
  // misc
  IoError,
  InvalidArgument,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail),
        code_(code),
        detail_(std::move(detail)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

/// Thrown by parse_plan. `path` is a JSON pointer into the offending document.
class SchemaError : public Error {
 public:
  SchemaError(std::string path, std::string reason)
      : Error(ErrorCode::SchemaError, path + " " + reason),
        path_(std::move(path)),
        reason_(std::move(reason)) {}

  const std::string& path() const noexcept { return path_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::string path_;
  std::string reason_;
};

class MalformedLine : public Error {
 public:
  MalformedLine(std::size_t line_no, std::string why)
      : Error(ErrorCode::MalformedLine, "line " + std::to_string(line_no) + ": " + why),
        line_no_(line_no) {}

  std::size_t line_no() const noexcept { return line_no_; }

 private:
  std::size_t line_no_;
};

class PositionalError : public Error {
 public:
  PositionalError(ErrorCode code, std::size_t position, std::string detail)
      : Error(code, std::move(detail)), position_(position) {}

  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

}  // namespace falconer
