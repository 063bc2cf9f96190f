#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "protrl/error.hpp"

namespace protrl {

inline constexpr std::size_t kDefaultMaxSequenceLength = 4096;
inline constexpr std::size_t kMaxSnippetLength = 2000;

/// Validated amino-acid sequence. Only constructible through
/// validate_sequence, so every instance satisfies the alphabet and
/// length rules.
class ProteinSequence {
 public:
  const std::string& residues() const noexcept { return residues_; }
  std::size_t length() const noexcept { return residues_.size(); }

  bool operator==(const ProteinSequence&) const = default;

 private:
  explicit ProteinSequence(std::string residues) : residues_(std::move(residues)) {}
  std::string residues_;

  friend ProteinSequence validate_sequence(std::string_view raw, std::size_t max_length);
};

/// Strips whitespace, uppercases, and checks the residue alphabet
/// (20 standard residues plus B, J, X, Z, U, O). IllegalResidue carries
/// the 0-based index into `raw`.
ProteinSequence validate_sequence(std::string_view raw,
                                  std::size_t max_length = kDefaultMaxSequenceLength);

bool is_residue_code(char upper);

/// Lowercase, trim, collapse internal whitespace. Throws EmptyKeyword.
std::string normalize_keyword(std::string_view raw);

struct MultimodalQuery {
  std::string text;
  std::optional<ProteinSequence> sequence;
  int round_index = 1;

  /// Throws InvalidQuery on blank text or round_index < 1.
  static MultimodalQuery make(std::string text, std::optional<ProteinSequence> sequence,
                              int round_index = 1);

  bool operator==(const MultimodalQuery&) const = default;
};

// Declaration order doubles as the ranking tie-break priority.
enum class SearchTool { UniProt = 0, Literature = 1, Web = 2 };

inline constexpr SearchTool kAllTools[] = {SearchTool::UniProt, SearchTool::Literature,
                                           SearchTool::Web};

std::string_view to_string(SearchTool tool);
/// Case-insensitive; throws UnknownTool for anything but the three names.
SearchTool parse_tool(std::string_view name);
std::optional<SearchTool> try_parse_tool(std::string_view name);

struct PlanNode {
  std::string id;
  std::string keyword;
  SearchTool tool = SearchTool::Web;

  bool operator==(const PlanNode&) const = default;
};

struct SearchPlan {
  std::vector<PlanNode> nodes;
  std::vector<std::pair<std::string, std::string>> edges;

  bool operator==(const SearchPlan&) const = default;
};

struct SearchResult {
  SearchTool source = SearchTool::Web;
  std::string doc_id;
  std::string title;
  std::string snippet;
  std::optional<std::string> url;
  std::optional<double> vec_score;
  std::optional<double> judge_score;
  std::optional<double> fused_score;

  bool operator==(const SearchResult&) const = default;
};

struct RankedResults {
  int round_index = 1;
  std::vector<SearchResult> items;
  // Per-node failures that degraded the round without aborting it.
  std::vector<std::string> warnings;

  bool operator==(const RankedResults&) const = default;
};

struct Usage {
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;

  std::int64_t total() const noexcept { return prompt_tokens + completion_tokens; }
  Usage& operator+=(const Usage& o) {
    prompt_tokens += o.prompt_tokens;
    completion_tokens += o.completion_tokens;
    return *this;
  }
  bool operator==(const Usage&) const = default;
};

struct RoundRecord {
  int index = 1;
  std::string query;
  SearchPlan plan;
  int plan_attempts = 1;
  RankedResults results;
  std::string reason;
  std::string answer;
  bool decide = false;
  std::optional<std::string> next_query;
  Usage usage;
  std::int64_t wall_ms = 0;

  bool operator==(const RoundRecord&) const = default;
};

enum class Stage { Planner, Executor };
std::string_view to_string(Stage stage);
Stage parse_stage(std::string_view name);

/// One structured backend output, kept for the format reward.
struct RawOutput {
  int round = 1;
  Stage stage = Stage::Planner;
  std::string text;

  bool operator==(const RawOutput&) const = default;
};

struct TraceTotals {
  std::int64_t rounds = 0;
  std::int64_t tokens = 0;
  std::int64_t wall_ms = 0;

  bool operator==(const TraceTotals&) const = default;
};

struct AbortInfo {
  int round = 0;
  std::string code;
  std::string message;

  bool operator==(const AbortInfo&) const = default;
};

struct EpisodeTrace {
  std::string episode_id;
  std::string query;
  std::optional<ProteinSequence> sequence;
  std::vector<RoundRecord> rounds;
  std::string final_answer;
  TraceTotals totals;
  bool exhausted = false;
  bool aborted = false;
  std::optional<AbortInfo> abort;
  std::vector<RawOutput> raw_outputs;

  /// Recomputes totals and final_answer from the rounds.
  void finalize();

  bool operator==(const EpisodeTrace&) const = default;
};

/// Every invariant violation found in one pass; empty means valid.
std::vector<Violation> validate_trace(const EpisodeTrace& trace);

struct GroundTruth {
  std::string answer;
  std::set<std::string> keywords;
  std::map<std::string, SearchTool> tool_map;

  /// Normalizes keywords and checks tool_map keys ⊆ keywords.
  static GroundTruth make(std::string answer, const std::vector<std::string>& keywords,
                          const std::vector<std::pair<std::string, SearchTool>>& tool_map);

  bool operator==(const GroundTruth&) const = default;
};

struct RewardWeights {
  double lambda_ans = 0.5;
  double lambda_kw = 0.2;
  double lambda_tool = 0.2;
  double lambda_fmt = 0.1;

  void validate() const;
  bool operator==(const RewardWeights&) const = default;
};

struct RewardBreakdown {
  double r_ans = 0;
  double r_kw = 0;
  double r_tool = 0;
  double r_fmt = 0;
  double r_total = 0;
  RewardWeights weights;

  bool operator==(const RewardBreakdown&) const = default;
};

}  // namespace protrl
