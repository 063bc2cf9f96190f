#include "protrl/error.hpp"

#include <algorithm>

namespace protrl {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptySequence: return "EmptySequence";
    case ErrorCode::IllegalResidue: return "IllegalResidue";
    case ErrorCode::TooLong: return "TooLong";
    case ErrorCode::EmptyKeyword: return "EmptyKeyword";
    case ErrorCode::InvalidQuery: return "InvalidQuery";
    case ErrorCode::UnknownTool: return "UnknownTool";
    case ErrorCode::InvalidTrace: return "InvalidTrace";
    case ErrorCode::MissingTag: return "MissingTag";
    case ErrorCode::DuplicateTag: return "DuplicateTag";
    case ErrorCode::UnclosedTag: return "UnclosedTag";
    case ErrorCode::NestedTag: return "NestedTag";
    case ErrorCode::UnmatchedCloseTag: return "UnmatchedCloseTag";
    case ErrorCode::MalformedBody: return "MalformedBody";
    case ErrorCode::CyclicPlan: return "CyclicPlan";
    case ErrorCode::DanglingEdge: return "DanglingEdge";
    case ErrorCode::DuplicateNodeId: return "DuplicateNodeId";
    case ErrorCode::EmptyPlan: return "EmptyPlan";
    case ErrorCode::TooManyNodes: return "TooManyNodes";
    case ErrorCode::InvalidDecide: return "InvalidDecide";
    case ErrorCode::MissingNextQuery: return "MissingNextQuery";
    case ErrorCode::UnexpectedNextQuery: return "UnexpectedNextQuery";
    case ErrorCode::ScriptMiss: return "ScriptMiss";
    case ErrorCode::BackendUnreachable: return "BackendUnreachable";
    case ErrorCode::BackendMalformed: return "BackendMalformed";
    case ErrorCode::UnparseableJudgment: return "UnparseableJudgment";
    case ErrorCode::SidecarUnreachable: return "SidecarUnreachable";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::SequenceTooLongForModel: return "SequenceTooLongForModel";
    case ErrorCode::SourceUnavailable: return "SourceUnavailable";
    case ErrorCode::CassetteMiss: return "CassetteMiss";
    case ErrorCode::RateLimited: return "RateLimited";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::AllSourcesFailed: return "AllSourcesFailed";
    case ErrorCode::PlanParseFailure: return "PlanParseFailure";
    case ErrorCode::ExecutorParseFailure: return "ExecutorParseFailure";
    case ErrorCode::EpisodeAborted: return "EpisodeAborted";
    case ErrorCode::MissingGroundTruth: return "MissingGroundTruth";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::NotReviewed: return "NotReviewed";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::GenerationRejected: return "GenerationRejected";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

std::optional<ErrorCode> parse_error_code(std::string_view name) {
  for (int i = 0; i <= static_cast<int>(ErrorCode::InvalidArgument); ++i) {
    const auto code = static_cast<ErrorCode>(i);
    if (to_string(code) == name) return code;
  }
  return std::nullopt;
}

void FormatVerdict::add(ErrorCode code, std::string message, std::int64_t offset) {
  violations.push_back({std::string(to_string(code)), std::move(message), offset});
  valid = false;
}

bool FormatVerdict::has(ErrorCode code) const {
  const auto name = to_string(code);
  return std::any_of(violations.begin(), violations.end(),
                     [&](const Violation& v) { return v.code == name; });
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

Error::Error(ErrorCode code, const std::string& message, FormatVerdict verdict)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code),
      verdict_(std::move(verdict)) {}

bool is_backend_error(ErrorCode code) {
  return code == ErrorCode::ScriptMiss || code == ErrorCode::BackendUnreachable ||
         code == ErrorCode::BackendMalformed || code == ErrorCode::SidecarUnreachable;
}

}  // namespace protrl
