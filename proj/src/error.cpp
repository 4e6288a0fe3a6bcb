#include "falconer/error.hpp"

namespace falconer {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::InvalidFraction: return "InvalidFraction";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::InvalidPlan: return "InvalidPlan";
    case ErrorCode::EmptyInstruction: return "EmptyInstruction";
    case ErrorCode::NoJsonFound: return "NoJsonFound";
    case ErrorCode::PlanInvalidAfterRepairs: return "PlanInvalidAfterRepairs";
    case ErrorCode::MissingGolden: return "MissingGolden";
    case ErrorCode::EmptyLabel: return "EmptyLabel";
    case ErrorCode::MalformedBio: return "MalformedBio";
    case ErrorCode::UnalignedSpan: return "UnalignedSpan";
    case ErrorCode::OverlappingSpans: return "OverlappingSpans";
    case ErrorCode::BadSplit: return "BadSplit";
    case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ErrorCode::ProtocolError: return "ProtocolError";
    case ErrorCode::CorpusTooSmall: return "CorpusTooSmall";
    case ErrorCode::SampleTooLarge: return "SampleTooLarge";
    case ErrorCode::WrongKind: return "WrongKind";
    case ErrorCode::UnboundBackend: return "UnboundBackend";
    case ErrorCode::MismatchedRuns: return "MismatchedRuns";
    case ErrorCode::UnknownRecord: return "UnknownRecord";
    case ErrorCode::PlanMismatch: return "PlanMismatch";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace falconer
