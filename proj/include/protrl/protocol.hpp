#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "protrl/domain.hpp"

// Tag grammar shared with generation backends. docs/protocol.md is the
// human-readable reference and quotes the instruction constants below.
namespace protrl::protocol {

inline constexpr std::string_view kProtocolTags[] = {"DAG",    "search_results", "reason",
                                                     "answer", "decide",         "next_query"};

bool is_protocol_tag(std::string_view name);

inline constexpr std::string_view kPlannerFormatInstruction =
    "Respond with exactly one <DAG>...</DAG> block. Its body must be a JSON object "
    "{\"nodes\":[{\"id\":\"n1\",\"keyword\":\"...\",\"tool\":\"UniProt|Literature|Web\"}],"
    "\"edges\":[[\"n1\",\"n2\"]]} describing an acyclic search plan with 1 to 16 nodes.";

inline constexpr std::string_view kExecutorFormatInstruction =
    "Respond with <reason>...</reason>, <answer>...</answer> and <decide>yes|no</decide>. "
    "If decide is no, also give <next_query>...</next_query> with the query for the next "
    "search round; if decide is yes, omit next_query.";

struct TagBlock {
  std::string tag;
  std::string body;
  std::size_t open_offset = 0;
};

/// Single-pass scan of the six protocol tags. Well-formed blocks are
/// returned in text order; structural defects (unclosed, nested, stray
/// close) are appended to `verdict`. Non-protocol markup is ignored.
std::vector<TagBlock> scan_blocks(std::string_view text, FormatVerdict& verdict);

struct ExecutorOutput {
  std::string reason;
  std::string answer;
  bool decide = false;
  std::optional<std::string> next_query;

  bool operator==(const ExecutorOutput&) const = default;
};

/// Fail-fast parsers. Errors carry the ErrorCode of the first defect hit.
SearchPlan parse_planner_output(std::string_view text);
ExecutorOutput parse_executor_output(std::string_view text);

/// Parses just the JSON body of a <DAG> block and validates the plan.
SearchPlan parse_plan_body(std::string_view body);

std::string serialize_plan(const SearchPlan& plan);
std::string serialize_executor_output(const ExecutorOutput& out);

/// `<search_results>[{"rank","source","id","title","snippet","score"}...]</search_results>`
std::string serialize_search_results(const RankedResults& results);

/// Inverse of serialize_search_results. `fused_score` receives "score";
/// url and the component scores are not part of the wire form.
RankedResults parse_search_results(std::string_view text);

/// Collects every violation in one pass; never throws.
/// valid ⇔ the matching parse_* call succeeds.
FormatVerdict check_format(std::string_view text, Stage stage);

/// Extracts the body of the single `<name>` block of a non-protocol tag
/// (for example `<query>` in generator outputs). nullopt if absent,
/// unclosed, or repeated.
std::optional<std::string> extract_single(std::string_view text, std::string_view name);

}  // namespace protrl::protocol
