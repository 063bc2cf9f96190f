#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace protrl {

enum class ErrorCode {
  // domain
  EmptySequence,
  IllegalResidue,
  TooLong,
  EmptyKeyword,
  InvalidQuery,
  UnknownTool,
  InvalidTrace,
  // protocol
  MissingTag,
  DuplicateTag,
  UnclosedTag,
  NestedTag,
  UnmatchedCloseTag,
  MalformedBody,
  CyclicPlan,
  DanglingEdge,
  DuplicateNodeId,
  EmptyPlan,
  TooManyNodes,
  InvalidDecide,
  MissingNextQuery,
  UnexpectedNextQuery,
  // gateway
  ScriptMiss,
  BackendUnreachable,
  BackendMalformed,
  UnparseableJudgment,
  // embeddings
  SidecarUnreachable,
  DimensionMismatch,
  ZeroVector,
  SequenceTooLongForModel,
  // retrieval
  SourceUnavailable,
  CassetteMiss,
  RateLimited,
  OutOfRange,
  AllSourcesFailed,
  // loop
  PlanParseFailure,
  ExecutorParseFailure,
  EpisodeAborted,
  // rewards / batch io
  MissingGroundTruth,
  SchemaMismatch,
  SchemaViolation,
  IoFailure,
  // data pipeline
  NotReviewed,
  NotFound,
  GenerationRejected,
  // configuration
  ConfigError,
  InvalidArgument,
};

std::string_view to_string(ErrorCode code);
std::optional<ErrorCode> parse_error_code(std::string_view name);

/// One finding of a format or plan check. `code` is the stable
/// string form of an ErrorCode; `offset` is a byte offset into the
/// checked text, or -1 when the finding is not positional.
struct Violation {
  std::string code;
  std::string message;
  std::int64_t offset = -1;

  bool operator==(const Violation&) const = default;
};

struct FormatVerdict {
  bool valid = true;
  std::vector<Violation> violations;

  void add(ErrorCode code, std::string message, std::int64_t offset = -1);
  bool has(ErrorCode code) const;
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);
  Error(ErrorCode code, const std::string& message, FormatVerdict verdict);

  ErrorCode code() const noexcept { return code_; }
  const std::optional<FormatVerdict>& verdict() const noexcept { return verdict_; }

  // Character position for IllegalResidue, round index for EpisodeAborted.
  std::int64_t position() const noexcept { return position_; }
  Error& with_position(std::int64_t p) {
    position_ = p;
    return *this;
  }

 private:
  ErrorCode code_;
  std::optional<FormatVerdict> verdict_;
  std::int64_t position_ = -1;
};

/// Backend-level failures map to exit code 2 in the CLI.
bool is_backend_error(ErrorCode code);

}  // namespace protrl
