#include "protrl/serialization.hpp"

#include <fstream>
#include <sstream>

#include "protrl/text.hpp"

namespace protrl {

namespace {

template <typename T>
void put_optional(json& j, const char* key, const std::optional<T>& v) {
  if (v) j[key] = *v;
}

template <typename T>
std::optional<T> get_optional(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<T>();
}

}  // namespace

void to_json(json& j, const PlanNode& n) {
  j = json{{"id", n.id}, {"keyword", n.keyword}, {"tool", to_string(n.tool)}};
}

void from_json(const json& j, PlanNode& n) {
  n.id = j.at("id").get<std::string>();
  n.keyword = j.at("keyword").get<std::string>();
  n.tool = parse_tool(j.at("tool").get<std::string>());
}

void to_json(json& j, const SearchPlan& p) {
  json edges = json::array();
  for (const auto& [from, to] : p.edges) edges.push_back(json::array({from, to}));
  j = json{{"nodes", p.nodes}, {"edges", edges}};
}

void from_json(const json& j, SearchPlan& p) {
  p.nodes = j.at("nodes").get<std::vector<PlanNode>>();
  p.edges.clear();
  for (const auto& e : j.at("edges")) {
    p.edges.emplace_back(e.at(0).get<std::string>(), e.at(1).get<std::string>());
  }
}

void to_json(json& j, const SearchResult& r) {
  j = json{{"source", to_string(r.source)},
           {"doc_id", r.doc_id},
           {"title", r.title},
           {"snippet", r.snippet}};
  put_optional(j, "url", r.url);
  put_optional(j, "vec_score", r.vec_score);
  put_optional(j, "judge_score", r.judge_score);
  put_optional(j, "fused_score", r.fused_score);
}

void from_json(const json& j, SearchResult& r) {
  r.source = parse_tool(j.at("source").get<std::string>());
  r.doc_id = j.at("doc_id").get<std::string>();
  r.title = j.value("title", "");
  r.snippet = j.value("snippet", "");
  r.url = get_optional<std::string>(j, "url");
  r.vec_score = get_optional<double>(j, "vec_score");
  r.judge_score = get_optional<double>(j, "judge_score");
  r.fused_score = get_optional<double>(j, "fused_score");
}

void to_json(json& j, const RankedResults& r) {
  j = json{{"round_index", r.round_index}, {"items", r.items}, {"warnings", r.warnings}};
}

void from_json(const json& j, RankedResults& r) {
  r.round_index = j.at("round_index").get<int>();
  r.items = j.at("items").get<std::vector<SearchResult>>();
  r.warnings = j.value("warnings", std::vector<std::string>{});
}

void to_json(json& j, const Usage& u) {
  j = json{{"prompt_tokens", u.prompt_tokens}, {"completion_tokens", u.completion_tokens}};
}

void from_json(const json& j, Usage& u) {
  u.prompt_tokens = j.at("prompt_tokens").get<std::int64_t>();
  u.completion_tokens = j.at("completion_tokens").get<std::int64_t>();
}

void to_json(json& j, const RoundRecord& r) {
  j = json{{"index", r.index},
           {"query", r.query},
           {"plan", r.plan},
           {"plan_attempts", r.plan_attempts},
           {"results", r.results},
           {"reason", r.reason},
           {"answer", r.answer},
           {"decide", r.decide},
           {"usage", r.usage},
           {"wall_ms", r.wall_ms}};
  put_optional(j, "next_query", r.next_query);
}

void from_json(const json& j, RoundRecord& r) {
  r.index = j.at("index").get<int>();
  r.query = j.value("query", "");
  r.plan = j.at("plan").get<SearchPlan>();
  r.plan_attempts = j.value("plan_attempts", 1);
  r.results = j.at("results").get<RankedResults>();
  r.reason = j.at("reason").get<std::string>();
  r.answer = j.at("answer").get<std::string>();
  r.decide = j.at("decide").get<bool>();
  r.next_query = get_optional<std::string>(j, "next_query");
  r.usage = j.at("usage").get<Usage>();
  r.wall_ms = j.at("wall_ms").get<std::int64_t>();
}

void to_json(json& j, const RawOutput& r) {
  j = json{{"round", r.round}, {"stage", to_string(r.stage)}, {"text", r.text}};
}

void from_json(const json& j, RawOutput& r) {
  r.round = j.at("round").get<int>();
  r.stage = parse_stage(j.at("stage").get<std::string>());
  r.text = j.at("text").get<std::string>();
}

void to_json(json& j, const EpisodeTrace& t) {
  j = json{{"schema", kTraceSchema},
           {"episode_id", t.episode_id},
           {"query", t.query},
           {"rounds", t.rounds},
           {"final_answer", t.final_answer},
           {"totals",
            {{"rounds", t.totals.rounds}, {"tokens", t.totals.tokens}, {"wall_ms", t.totals.wall_ms}}},
           {"exhausted", t.exhausted},
           {"aborted", t.aborted},
           {"raw_outputs", t.raw_outputs}};
  j["sequence"] = t.sequence ? json(t.sequence->residues()) : json(nullptr);
  if (t.abort) {
    j["abort"] = {{"round", t.abort->round}, {"code", t.abort->code}, {"message", t.abort->message}};
  }
}

void from_json(const json& j, EpisodeTrace& t) {
  if (j.value("schema", "") != kTraceSchema)
    throw Error(ErrorCode::SchemaMismatch,
                "expected schema \"" + std::string(kTraceSchema) + "\"");
  t.episode_id = j.at("episode_id").get<std::string>();
  t.query = j.at("query").get<std::string>();
  t.sequence.reset();
  if (auto it = j.find("sequence"); it != j.end() && !it->is_null())
    t.sequence = validate_sequence(it->get<std::string>());
  t.rounds = j.at("rounds").get<std::vector<RoundRecord>>();
  t.final_answer = j.at("final_answer").get<std::string>();
  const auto& tot = j.at("totals");
  t.totals.rounds = tot.at("rounds").get<std::int64_t>();
  t.totals.tokens = tot.at("tokens").get<std::int64_t>();
  t.totals.wall_ms = tot.at("wall_ms").get<std::int64_t>();
  t.exhausted = j.value("exhausted", false);
  t.aborted = j.value("aborted", false);
  t.abort.reset();
  if (auto it = j.find("abort"); it != j.end() && !it->is_null()) {
    t.abort = AbortInfo{it->at("round").get<int>(), it->at("code").get<std::string>(),
                        it->at("message").get<std::string>()};
  }
  t.raw_outputs = j.value("raw_outputs", std::vector<RawOutput>{});
}

void to_json(json& j, const GroundTruth& g) {
  json tools = json::object();
  for (const auto& [k, t] : g.tool_map) tools[k] = to_string(t);
  j = json{{"answer", g.answer}, {"keywords", g.keywords}, {"tool_map", tools}};
}

void from_json(const json& j, GroundTruth& g) {
  std::vector<std::pair<std::string, SearchTool>> tools;
  for (const auto& [k, v] : j.at("tool_map").items()) tools.emplace_back(k, parse_tool(v.get<std::string>()));
  g = GroundTruth::make(j.at("answer").get<std::string>(),
                        j.at("keywords").get<std::vector<std::string>>(), tools);
}

void to_json(json& j, const RewardWeights& w) {
  j = json{{"lambda_ans", w.lambda_ans},
           {"lambda_kw", w.lambda_kw},
           {"lambda_tool", w.lambda_tool},
           {"lambda_fmt", w.lambda_fmt}};
}

void from_json(const json& j, RewardWeights& w) {
  w.lambda_ans = j.value("lambda_ans", 0.5);
  w.lambda_kw = j.value("lambda_kw", 0.2);
  w.lambda_tool = j.value("lambda_tool", 0.2);
  w.lambda_fmt = j.value("lambda_fmt", 0.1);
  w.validate();
}

void to_json(json& j, const RewardBreakdown& b) {
  j = json{{"r_ans", b.r_ans},   {"r_kw", b.r_kw},       {"r_tool", b.r_tool},
           {"r_fmt", b.r_fmt},   {"r_total", b.r_total}, {"weights", b.weights}};
}

std::string trace_to_line(const EpisodeTrace& trace) { return json(trace).dump(); }

EpisodeTrace trace_from_json(const json& j) {
  try {
    return j.get<EpisodeTrace>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaMismatch, std::string("trace: ") + e.what());
  }
}

void append_line(const std::filesystem::path& path, std::string_view line) {
  std::ofstream out(path, std::ios::app | std::ios::binary);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + path.string() + " for append");
  out << line << '\n';
  if (!out) throw Error(ErrorCode::IoFailure, "write failed: " + path.string());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  out << content;
  if (!out) throw Error(ErrorCode::IoFailure, "write failed: " + path.string());
}

std::vector<std::pair<std::size_t, std::string>> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot read " + path.string());
  std::vector<std::pair<std::size_t, std::string>> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!text::trim(line).empty()) out.emplace_back(n, line);
  }
  return out;
}

}  // namespace protrl
