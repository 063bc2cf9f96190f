#include "protrl/protocol.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "protrl/plan.hpp"
#include "protrl/serialization.hpp"
#include "protrl/text.hpp"

namespace protrl::protocol {

namespace {

struct Token {
  std::size_t pos = 0;
  std::size_t len = 0;
  std::string_view name;
  bool close = false;
};

std::vector<Token> lex(std::string_view text) {
  std::vector<Token> tokens;
  for (std::size_t i = text.find('<'); i != std::string_view::npos; i = text.find('<', i + 1)) {
    const bool close = i + 1 < text.size() && text[i + 1] == '/';
    const auto name_at = i + (close ? 2 : 1);
    for (auto name : kProtocolTags) {
      if (text.compare(name_at, name.size(), name) == 0 && name_at + name.size() < text.size() &&
          text[name_at + name.size()] == '>') {
        tokens.push_back({i, name.size() + (close ? 3 : 2), name, close});
        break;
      }
    }
  }
  return tokens;
}

std::string tag_str(std::string_view name) { return "<" + std::string(name) + ">"; }

// Index of the next token after `from` carrying `name`, or npos.
std::size_t next_with_name(const std::vector<Token>& toks, std::size_t from, std::string_view name) {
  for (auto j = from + 1; j < toks.size(); ++j)
    if (toks[j].name == name) return j;
  return std::string_view::npos;
}

// '<' and '>' are escaped so bodies can never contain a tag token.
std::string escape_angles(const std::string& dumped) {
  std::string out;
  out.reserve(dumped.size());
  for (char c : dumped) {
    if (c == '<') out += "\\u003c";
    else if (c == '>') out += "\\u003e";
    else out.push_back(c);
  }
  return out;
}

void check_plan_body(std::string_view body, FormatVerdict& v, SearchPlan* out) {
  json j = json::parse(body.begin(), body.end(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    v.add(ErrorCode::MalformedBody, "DAG body is not a JSON object");
    return;
  }
  auto nodes = j.find("nodes");
  if (nodes == j.end() || !nodes->is_array()) {
    v.add(ErrorCode::MalformedBody, "DAG body needs a \"nodes\" array");
    return;
  }
  SearchPlan plan;
  bool shape_ok = true;
  for (const auto& n : *nodes) {
    if (!n.is_object() || !n.contains("id") || !n["id"].is_string() || !n.contains("keyword") ||
        !n["keyword"].is_string() || !n.contains("tool") || !n["tool"].is_string()) {
      v.add(ErrorCode::MalformedBody, "node needs string id, keyword and tool");
      shape_ok = false;
      continue;
    }
    auto tool = try_parse_tool(n["tool"].get<std::string>());
    if (!tool) {
      v.add(ErrorCode::UnknownTool, "unknown tool \"" + n["tool"].get<std::string>() + "\"");
      shape_ok = false;
      continue;
    }
    plan.nodes.push_back({n["id"].get<std::string>(), n["keyword"].get<std::string>(), *tool});
  }
  if (auto edges = j.find("edges"); edges != j.end()) {
    if (!edges->is_array()) {
      v.add(ErrorCode::MalformedBody, "\"edges\" must be an array");
      shape_ok = false;
    } else {
      for (const auto& e : *edges) {
        if (!e.is_array() || e.size() != 2 || !e[0].is_string() || !e[1].is_string()) {
          v.add(ErrorCode::MalformedBody, "edge must be a [from, to] pair of node ids");
          shape_ok = false;
          continue;
        }
        plan.edges.emplace_back(e[0].get<std::string>(), e[1].get<std::string>());
      }
    }
  }
  auto structural = validate_plan(plan);
  // An empty node list caused only by rejected nodes is already reported.
  for (auto& viol : structural.violations) {
    if (!shape_ok && viol.code == to_string(ErrorCode::EmptyPlan)) continue;
    v.violations.push_back(std::move(viol));
    v.valid = false;
  }
  if (out && v.valid) *out = std::move(plan);
}

void check_executor_fields(const std::vector<TagBlock>& blocks, FormatVerdict& v,
                           ExecutorOutput* out) {
  std::optional<bool> decide;
  if (auto it = std::find_if(blocks.begin(), blocks.end(), [](auto& b) { return b.tag == "decide"; });
      it != blocks.end()) {
    const auto d = text::to_lower(text::trim(it->body));
    if (d == "yes") decide = true;
    else if (d == "no") decide = false;
    else v.add(ErrorCode::InvalidDecide, "decide must be yes or no, got \"" + text::trim(it->body) + "\"",
               static_cast<std::int64_t>(it->open_offset));
  }
  auto nq = std::find_if(blocks.begin(), blocks.end(), [](auto& b) { return b.tag == "next_query"; });
  if (decide) {
    if (*decide && nq != blocks.end())
      v.add(ErrorCode::UnexpectedNextQuery, "next_query given although decide is yes",
            static_cast<std::int64_t>(nq->open_offset));
    if (!*decide && (nq == blocks.end() || text::trim(nq->body).empty()))
      v.add(ErrorCode::MissingNextQuery, "decide is no but next_query is missing or empty");
  }
  if (out && v.valid) {
    auto body_of = [&](std::string_view tag) {
      auto it = std::find_if(blocks.begin(), blocks.end(), [&](auto& b) { return b.tag == tag; });
      return text::trim(it->body);
    };
    out->reason = body_of("reason");
    out->answer = body_of("answer");
    out->decide = *decide;
    if (!*decide) out->next_query = text::trim(nq->body);
  }
}

std::vector<std::string_view> required_tags(Stage stage) {
  if (stage == Stage::Planner) return {"DAG"};
  return {"reason", "answer", "decide"};
}

// Fail-fast structural pass used by the parsers.
std::vector<TagBlock> strict_blocks(std::string_view text) {
  const auto toks = lex(text);
  std::vector<TagBlock> blocks;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    const auto& t = toks[i];
    if (t.close)
      throw Error(ErrorCode::UnmatchedCloseTag, "</" + std::string(t.name) + "> without an opening tag");
    if (i + 1 >= toks.size()) throw Error(ErrorCode::UnclosedTag, tag_str(t.name) + " is never closed");
    const auto& u = toks[i + 1];
    if (!u.close) {
      auto j = next_with_name(toks, i, t.name);
      if (j != std::string_view::npos && toks[j].close && u.name != t.name)
        throw Error(ErrorCode::NestedTag, tag_str(u.name) + " nested inside " + tag_str(t.name));
      throw Error(ErrorCode::UnclosedTag, tag_str(t.name) + " is never closed");
    }
    if (u.name != t.name)
      throw Error(ErrorCode::UnmatchedCloseTag, "</" + std::string(u.name) + "> closes " + tag_str(t.name));
    const auto body_at = t.pos + t.len;
    blocks.push_back({std::string(t.name), std::string(text.substr(body_at, u.pos - body_at)), t.pos});
    ++i;
  }
  return blocks;
}

void require_unique(const std::vector<TagBlock>& blocks, std::string_view tag) {
  auto n = std::count_if(blocks.begin(), blocks.end(), [&](auto& b) { return b.tag == tag; });
  if (n == 0) throw Error(ErrorCode::MissingTag, tag_str(tag) + " is missing");
  if (n > 1) throw Error(ErrorCode::DuplicateTag, tag_str(tag) + " appears " + std::to_string(n) + " times");
}

[[noreturn]] void throw_first(const FormatVerdict& v) {
  const auto& first = v.violations.front();
  for (auto code : {ErrorCode::MalformedBody, ErrorCode::UnknownTool, ErrorCode::CyclicPlan,
                    ErrorCode::DanglingEdge, ErrorCode::DuplicateNodeId, ErrorCode::EmptyPlan,
                    ErrorCode::TooManyNodes, ErrorCode::EmptyKeyword, ErrorCode::InvalidDecide,
                    ErrorCode::MissingNextQuery, ErrorCode::UnexpectedNextQuery}) {
    if (first.code == to_string(code)) throw Error(code, first.message, v);
  }
  throw Error(ErrorCode::MalformedBody, first.message, v);
}

}  // namespace

bool is_protocol_tag(std::string_view name) {
  return std::find(std::begin(kProtocolTags), std::end(kProtocolTags), name) != std::end(kProtocolTags);
}

std::vector<TagBlock> scan_blocks(std::string_view text, FormatVerdict& v) {
  const auto toks = lex(text);
  std::vector<TagBlock> blocks;
  std::optional<std::size_t> cur;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    const auto& t = toks[i];
    const auto off = static_cast<std::int64_t>(t.pos);
    if (!t.close) {
      if (!cur) {
        cur = i;
        continue;
      }
      const auto& open = toks[*cur];
      auto j = next_with_name(toks, *cur, open.name);
      // The outer block closes later: this is a nested block. Skip to the
      // outer close and keep the outer block.
      if (t.name != open.name && j != std::string_view::npos && toks[j].close) {
        v.add(ErrorCode::NestedTag, tag_str(t.name) + " nested inside " + tag_str(open.name), off);
        const auto body_at = open.pos + open.len;
        blocks.push_back({std::string(open.name),
                          std::string(text.substr(body_at, toks[j].pos - body_at)), open.pos});
        cur.reset();
        i = j;
        continue;
      }
      v.add(ErrorCode::UnclosedTag, tag_str(open.name) + " is never closed",
            static_cast<std::int64_t>(open.pos));
      cur = i;
      continue;
    }
    if (cur && toks[*cur].name == t.name) {
      const auto& open = toks[*cur];
      const auto body_at = open.pos + open.len;
      blocks.push_back({std::string(open.name), std::string(text.substr(body_at, t.pos - body_at)), open.pos});
      cur.reset();
    } else {
      v.add(ErrorCode::UnmatchedCloseTag, "</" + std::string(t.name) + "> without a matching opening tag", off);
    }
  }
  if (cur) {
    v.add(ErrorCode::UnclosedTag, tag_str(toks[*cur].name) + " is never closed",
          static_cast<std::int64_t>(toks[*cur].pos));
  }
  return blocks;
}

FormatVerdict check_format(std::string_view text, Stage stage) {
  FormatVerdict v;
  const auto blocks = scan_blocks(text, v);
  bool counts_ok = true;
  for (auto tag : required_tags(stage)) {
    auto n = std::count_if(blocks.begin(), blocks.end(), [&](auto& b) { return b.tag == tag; });
    if (n == 0) {
      counts_ok = false;
      // an unclosed block is already reported
      const auto unclosed = tag_str(tag) + " is never closed";
      bool reported = std::any_of(v.violations.begin(), v.violations.end(),
                                  [&](auto& x) { return x.message == unclosed; });
      if (!reported) v.add(ErrorCode::MissingTag, tag_str(tag) + " is missing");
    } else if (n > 1) {
      counts_ok = false;
      v.add(ErrorCode::DuplicateTag, tag_str(tag) + " appears " + std::to_string(n) + " times");
    }
  }
  if (stage == Stage::Executor) {
    auto nq = std::count_if(blocks.begin(), blocks.end(), [](auto& b) { return b.tag == "next_query"; });
    if (nq > 1) {
      counts_ok = false;
      v.add(ErrorCode::DuplicateTag, "<next_query> appears " + std::to_string(nq) + " times");
    }
    check_executor_fields(blocks, v, nullptr);
  } else if (counts_ok) {
    auto it = std::find_if(blocks.begin(), blocks.end(), [](auto& b) { return b.tag == "DAG"; });
    check_plan_body(it->body, v, nullptr);
  } else {
    for (const auto& b : blocks)
      if (b.tag == "DAG") check_plan_body(b.body, v, nullptr);
  }
  return v;
}

SearchPlan parse_plan_body(std::string_view body) {
  FormatVerdict v;
  SearchPlan plan;
  check_plan_body(body, v, &plan);
  if (!v.valid) throw_first(v);
  return plan;
}

SearchPlan parse_planner_output(std::string_view text) {
  const auto blocks = strict_blocks(text);
  require_unique(blocks, "DAG");
  auto it = std::find_if(blocks.begin(), blocks.end(), [](auto& b) { return b.tag == "DAG"; });
  return parse_plan_body(it->body);
}

ExecutorOutput parse_executor_output(std::string_view text) {
  const auto blocks = strict_blocks(text);
  for (auto tag : required_tags(Stage::Executor)) require_unique(blocks, tag);
  if (std::count_if(blocks.begin(), blocks.end(), [](auto& b) { return b.tag == "next_query"; }) > 1)
    throw Error(ErrorCode::DuplicateTag, "<next_query> appears more than once");
  FormatVerdict v;
  ExecutorOutput out;
  check_executor_fields(blocks, v, &out);
  if (!v.valid) throw_first(v);
  return out;
}

std::string serialize_plan(const SearchPlan& plan) {
  return "<DAG>" + escape_angles(json(plan).dump()) + "</DAG>";
}

std::string serialize_executor_output(const ExecutorOutput& out) {
  std::string s = "<reason>" + out.reason + "</reason><answer>" + out.answer + "</answer><decide>" +
                  (out.decide ? "yes" : "no") + "</decide>";
  if (out.next_query) s += "<next_query>" + *out.next_query + "</next_query>";
  return s;
}

std::string serialize_search_results(const RankedResults& results) {
  auto arr = nlohmann::ordered_json::array();
  int rank = 1;
  for (const auto& r : results.items) {
    nlohmann::ordered_json item;
    item["rank"] = rank++;
    item["source"] = to_string(r.source);
    item["id"] = r.doc_id;
    item["title"] = r.title;
    item["snippet"] = r.snippet;
    item["score"] = r.fused_score ? nlohmann::ordered_json(*r.fused_score) : nlohmann::ordered_json(nullptr);
    arr.push_back(std::move(item));
  }
  return "<search_results>" + escape_angles(arr.dump()) + "</search_results>";
}

RankedResults parse_search_results(std::string_view text) {
  const auto blocks = strict_blocks(text);
  require_unique(blocks, "search_results");
  auto it = std::find_if(blocks.begin(), blocks.end(), [](auto& b) { return b.tag == "search_results"; });
  json arr = json::parse(it->body, nullptr, false);
  if (arr.is_discarded() || !arr.is_array())
    throw Error(ErrorCode::MalformedBody, "search_results body is not a JSON array");
  RankedResults out;
  int expected_rank = 1;
  try {
    for (const auto& item : arr) {
      if (item.at("rank").get<int>() != expected_rank++)
        throw Error(ErrorCode::MalformedBody, "ranks must run 1..n in order");
      SearchResult r;
      r.source = parse_tool(item.at("source").get<std::string>());
      r.doc_id = item.at("id").get<std::string>();
      r.title = item.at("title").get<std::string>();
      r.snippet = item.at("snippet").get<std::string>();
      if (!item.at("score").is_null()) r.fused_score = item.at("score").get<double>();
      out.items.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedBody, std::string("search_results item: ") + e.what());
  }
  return out;
}

std::optional<std::string> extract_single(std::string_view text, std::string_view name) {
  const auto open = tag_str(name);
  const auto close = "</" + std::string(name) + ">";
  auto a = text.find(open);
  if (a == std::string_view::npos || text.find(open, a + 1) != std::string_view::npos) return std::nullopt;
  auto b = text.find(close, a + open.size());
  if (b == std::string_view::npos || text.find(close, b + 1) != std::string_view::npos) return std::nullopt;
  if (text.find(close) < a) return std::nullopt;
  return std::string(text.substr(a + open.size(), b - a - open.size()));
}

}  // namespace protrl::protocol
