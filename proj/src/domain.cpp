#include "protrl/domain.hpp"

#include <cctype>
#include <cmath>

#include "protrl/text.hpp"

namespace protrl {

bool is_residue_code(char c) {
  switch (c) {
    case 'A': case 'C': case 'D': case 'E': case 'F': case 'G': case 'H':
    case 'I': case 'K': case 'L': case 'M': case 'N': case 'P': case 'Q':
    case 'R': case 'S': case 'T': case 'V': case 'W': case 'Y':
    case 'B': case 'J': case 'X': case 'Z': case 'U': case 'O':
      return true;
    default:
      return false;
  }
}

ProteinSequence validate_sequence(std::string_view raw, std::size_t max_length) {
  std::string residues;
  residues.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto c = static_cast<unsigned char>(raw[i]);
    if (std::isspace(c)) continue;
    const char up = static_cast<char>(std::toupper(c));
    if (!is_residue_code(up)) {
      throw Error(ErrorCode::IllegalResidue,
                  "illegal residue '" + std::string(1, raw[i]) + "' at position " +
                      std::to_string(i))
          .with_position(static_cast<std::int64_t>(i));
    }
    residues.push_back(up);
  }
  if (residues.empty()) throw Error(ErrorCode::EmptySequence, "sequence has no residues");
  if (residues.size() > max_length) {
    throw Error(ErrorCode::TooLong, "sequence length " + std::to_string(residues.size()) +
                                        " exceeds " + std::to_string(max_length))
        .with_position(static_cast<std::int64_t>(residues.size()));
  }
  return ProteinSequence(std::move(residues));
}

std::string normalize_keyword(std::string_view raw) {
  auto out = text::collapse_whitespace_lower(raw);
  if (out.empty()) throw Error(ErrorCode::EmptyKeyword, "keyword is empty after normalization");
  return out;
}

MultimodalQuery MultimodalQuery::make(std::string text, std::optional<ProteinSequence> sequence,
                                      int round_index) {
  if (text::trim(text).empty()) throw Error(ErrorCode::InvalidQuery, "query text is empty");
  if (round_index < 1) throw Error(ErrorCode::InvalidQuery, "round_index must be >= 1");
  return MultimodalQuery{std::move(text), std::move(sequence), round_index};
}

std::string_view to_string(SearchTool tool) {
  switch (tool) {
    case SearchTool::UniProt: return "UniProt";
    case SearchTool::Literature: return "Literature";
    case SearchTool::Web: return "Web";
  }
  return "Web";
}

std::optional<SearchTool> try_parse_tool(std::string_view name) {
  const auto lower = text::to_lower(text::trim(name));
  if (lower == "uniprot") return SearchTool::UniProt;
  if (lower == "literature") return SearchTool::Literature;
  if (lower == "web") return SearchTool::Web;
  return std::nullopt;
}

SearchTool parse_tool(std::string_view name) {
  if (auto t = try_parse_tool(name)) return *t;
  throw Error(ErrorCode::UnknownTool, "unknown tool \"" + std::string(name) + "\"");
}

std::string_view to_string(Stage stage) {
  return stage == Stage::Planner ? "planner" : "executor";
}

Stage parse_stage(std::string_view name) {
  if (name == "planner") return Stage::Planner;
  if (name == "executor") return Stage::Executor;
  throw Error(ErrorCode::InvalidArgument, "unknown stage \"" + std::string(name) + "\"");
}

void EpisodeTrace::finalize() {
  totals = {};
  totals.rounds = static_cast<std::int64_t>(rounds.size());
  for (const auto& r : rounds) {
    totals.tokens += r.usage.total();
    totals.wall_ms += r.wall_ms;
  }
  final_answer = rounds.empty() ? std::string() : rounds.back().answer;
}

std::vector<Violation> validate_trace(const EpisodeTrace& trace) {
  FormatVerdict v;
  if (trace.episode_id.empty()) v.add(ErrorCode::InvalidTrace, "episode_id is empty");
  if (trace.rounds.empty() && !trace.aborted)
    v.add(ErrorCode::InvalidTrace, "rounds: a completed episode needs at least one round");
  if (trace.aborted != trace.abort.has_value())
    v.add(ErrorCode::InvalidTrace, "aborted flag and abort record disagree");

  std::int64_t tokens = 0;
  std::int64_t wall = 0;
  for (std::size_t i = 0; i < trace.rounds.size(); ++i) {
    const auto& r = trace.rounds[i];
    const auto tag = "round " + std::to_string(i + 1);
    if (r.index != static_cast<int>(i) + 1)
      v.add(ErrorCode::InvalidTrace, tag + ": index " + std::to_string(r.index) +
                                         " breaks the consecutive 1..n order");
    if (r.decide && i + 1 != trace.rounds.size())
      v.add(ErrorCode::InvalidTrace, tag + ": decide=true before the last round");
    if (!r.decide && (!r.next_query || text::trim(*r.next_query).empty()))
      v.add(ErrorCode::InvalidTrace, tag + ": decide=false without next_query");
    if (r.decide && r.next_query)
      v.add(ErrorCode::InvalidTrace, tag + ": decide=true with next_query");
    if (r.usage.prompt_tokens < 0 || r.usage.completion_tokens < 0)
      v.add(ErrorCode::InvalidTrace, tag + ": negative token usage");
    if (r.wall_ms < 0) v.add(ErrorCode::InvalidTrace, tag + ": negative wall_ms");
    tokens += r.usage.total();
    wall += r.wall_ms;
  }
  if (!trace.rounds.empty() && trace.final_answer != trace.rounds.back().answer)
    v.add(ErrorCode::InvalidTrace, "final_answer differs from the last round's answer");
  if (trace.totals.rounds != static_cast<std::int64_t>(trace.rounds.size()))
    v.add(ErrorCode::InvalidTrace, "totals.rounds mismatch");
  if (trace.totals.tokens != tokens)
    v.add(ErrorCode::InvalidTrace, "totals.tokens " + std::to_string(trace.totals.tokens) +
                                       " != token sum " + std::to_string(tokens));
  if (trace.totals.wall_ms != wall) v.add(ErrorCode::InvalidTrace, "totals.wall_ms mismatch");
  if (trace.exhausted && !trace.rounds.empty() && trace.rounds.back().decide)
    v.add(ErrorCode::InvalidTrace, "exhausted flag set but last round decided");
  return v.violations;
}

GroundTruth GroundTruth::make(std::string answer, const std::vector<std::string>& keywords,
                              const std::vector<std::pair<std::string, SearchTool>>& tool_map) {
  GroundTruth gt;
  gt.answer = std::move(answer);
  for (const auto& k : keywords) gt.keywords.insert(normalize_keyword(k));
  for (const auto& [k, tool] : tool_map) {
    auto nk = normalize_keyword(k);
    if (!gt.keywords.count(nk))
      throw Error(ErrorCode::SchemaViolation, "tool_map key \"" + nk + "\" is not a GT keyword");
    gt.tool_map.emplace(std::move(nk), tool);
  }
  return gt;
}

void RewardWeights::validate() const {
  for (double w : {lambda_ans, lambda_kw, lambda_tool, lambda_fmt}) {
    if (!(w >= 0) || !std::isfinite(w))
      throw Error(ErrorCode::ConfigError, "reward weights must be finite and >= 0");
  }
}

}  // namespace protrl
