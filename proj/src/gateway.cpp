#include "protrl/gateway.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>

#include "protrl/http.hpp"
#include "protrl/protocol.hpp"
#include "protrl/serialization.hpp"
#include "protrl/text.hpp"

namespace protrl {

std::string_view to_string(Role role) {
  switch (role) {
    case Role::Planner: return "planner";
    case Role::Executor: return "executor";
    case Role::JudgeRelevance: return "judge_relevance";
    case Role::JudgeAnswer: return "judge_answer";
    case Role::Generator: return "generator";
  }
  return "planner";
}

Role parse_role(std::string_view name) {
  for (auto r : {Role::Planner, Role::Executor, Role::JudgeRelevance, Role::JudgeAnswer, Role::Generator})
    if (to_string(r) == name) return r;
  throw Error(ErrorCode::InvalidArgument, "unknown role \"" + std::string(name) + "\"");
}

std::string script_key(Role role, std::string_view prompt) {
  return std::string(to_string(role)) + ":" + text::digest_hex(prompt);
}

// ---------------------------------------------------------------------------
// Scripted

ScriptedBackend::ScriptedBackend(const json& manifest) {
  if (!manifest.is_object()) throw Error(ErrorCode::ConfigError, "script manifest must be a JSON object");
  for (const auto& [key, v] : manifest.items()) {
    Entry e;
    if (v.is_string()) {
      e.text = v.get<std::string>();
    } else if (v.is_object() && v.contains("text") && v["text"].is_string()) {
      e.text = v["text"].get<std::string>();
      if (v.contains("prompt_tokens")) e.prompt_tokens = v["prompt_tokens"].get<std::int64_t>();
      if (v.contains("completion_tokens")) e.completion_tokens = v["completion_tokens"].get<std::int64_t>();
    } else {
      throw Error(ErrorCode::ConfigError, "script entry \"" + key + "\" needs a text field");
    }
    entries_.emplace(key, std::move(e));
  }
}

std::shared_ptr<ScriptedBackend> ScriptedBackend::from_file(const std::filesystem::path& path) {
  json manifest = json::parse(read_file(path), nullptr, false);
  if (manifest.is_discarded()) throw Error(ErrorCode::ConfigError, "script manifest " + path.string() + " is not JSON");
  return std::make_shared<ScriptedBackend>(manifest);
}

GenerationResponse ScriptedBackend::generate(const GenerationRequest& request) {
  const auto key = script_key(request.role, request.prompt);
  auto it = entries_.find(key);
  if (it == entries_.end()) throw Error(ErrorCode::ScriptMiss, "no scripted reply for " + key);
  const auto& e = it->second;
  return {e.text, Usage{e.prompt_tokens.value_or(text::word_count(request.prompt)),
                        e.completion_tokens.value_or(text::word_count(e.text))}};
}

// ---------------------------------------------------------------------------
// Remote

GenerationResponse RemoteBackend::generate(const GenerationRequest& request) {
  json body = {{"role", to_string(request.role)},
               {"prompt", request.prompt},
               {"max_tokens", request.max_tokens}};
  http::Headers headers;
  if (!config_.auth_token.empty()) headers.emplace_back("Authorization", "Bearer " + config_.auth_token);
  auto res = http::post(config_.url, body.dump(), "application/json", headers, config_.timeout_s);
  if (res.status == 0) throw Error(ErrorCode::BackendUnreachable, config_.url + ": " + res.error);
  if (!res.ok())
    throw Error(ErrorCode::BackendMalformed, "HTTP " + std::to_string(res.status) + " from " + config_.url);
  json j = json::parse(res.body, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("text") || !j["text"].is_string())
    throw Error(ErrorCode::BackendMalformed, "response lacks a text field");
  GenerationResponse out;
  out.text = j["text"].get<std::string>();
  try {
    out.usage.prompt_tokens = j.value("prompt_tokens", std::int64_t{0});
    out.usage.completion_tokens = j.value("completion_tokens", std::int64_t{0});
  } catch (const json::exception&) {
    throw Error(ErrorCode::BackendMalformed, "token counts must be integers");
  }
  if (out.usage.prompt_tokens < 0 || out.usage.completion_tokens < 0)
    throw Error(ErrorCode::BackendMalformed, "negative token counts");
  return out;
}

// ---------------------------------------------------------------------------
// Scenario / recording

ScenarioBackend::ScenarioBackend(const json& scenario) {
  for (auto role : {Role::Planner, Role::Executor, Role::Generator}) {
    if (auto it = scenario.find(std::string(to_string(role))); it != scenario.end()) {
      for (const auto& s : *it) queues_[role].push_back(s.get<std::string>());
    }
  }
  for (auto role : {Role::JudgeRelevance, Role::JudgeAnswer}) {
    JudgeScript js;
    if (auto it = scenario.find(std::string(to_string(role))); it != scenario.end()) {
      js.fallback = it->value("default", js.fallback);
      for (const auto& r : it->value("rules", json::array()))
        js.rules.push_back({r.at("contains").get<std::string>(), r.at("reply").get<std::string>()});
    }
    judges_[role] = std::move(js);
  }
}

GenerationResponse ScenarioBackend::generate(const GenerationRequest& request) {
  std::string reply;
  if (request.role == Role::JudgeRelevance || request.role == Role::JudgeAnswer) {
    const auto& js = judges_.at(request.role);
    reply = js.fallback;
    for (const auto& rule : js.rules) {
      if (request.prompt.find(rule.contains) != std::string::npos) {
        reply = rule.reply;
        break;
      }
    }
  } else {
    std::lock_guard lock(mu_);
    auto& q = queues_[request.role];
    if (q.empty())
      throw Error(ErrorCode::ScriptMiss, "scenario has no more " + std::string(to_string(request.role)) + " replies");
    reply = q.front();
    q.pop_front();
  }
  return {reply, Usage{text::word_count(request.prompt), text::word_count(reply)}};
}

GenerationResponse RecordingBackend::generate(const GenerationRequest& request) {
  auto res = inner_->generate(request);
  const auto key = script_key(request.role, request.prompt);
  json entry = {{"text", res.text},
                {"prompt_tokens", res.usage.prompt_tokens},
                {"completion_tokens", res.usage.completion_tokens}};
  std::lock_guard lock(mu_);
  if (auto it = manifest_.find(key); it != manifest_.end() && (*it)["text"] != entry["text"])
    throw Error(ErrorCode::InvalidArgument, "prompt " + key + " recorded with two different replies");
  manifest_[key] = std::move(entry);
  return res;
}

json RecordingBackend::manifest() const {
  std::lock_guard lock(mu_);
  return manifest_;
}

// ---------------------------------------------------------------------------
// Prompts

std::string render_sequence_block(const std::optional<ProteinSequence>& sequence) {
  if (!sequence) return std::string(kNoSequenceMarker);
  const auto& r = sequence->residues();
  if (r.size() <= kSequenceHead + kSequenceTail) return "Protein sequence (length " + std::to_string(r.size()) + "): " + r;
  return "Protein sequence (length " + std::to_string(r.size()) + ", truncated to first " +
         std::to_string(kSequenceHead) + " and last " + std::to_string(kSequenceTail) +
         " residues): " + r.substr(0, kSequenceHead) + "..." + r.substr(r.size() - kSequenceTail);
}

std::string build_planner_prompt(const MultimodalQuery& query, std::string_view sequence_summary) {
  std::string p;
  p += "You are the Planner of a protein search agent.\n";
  p += "Extract protein-centered keywords from the query and assign each one a search tool.\n";
  p += "Allowed tools: UniProt (protein database), Literature (PubMed articles), Web (web search).\n\n";
  p += "Query: " + query.text + "\n";
  p += std::string(sequence_summary) + "\n\n";
  p += protocol::kPlannerFormatInstruction;
  p += "\n";
  return p;
}

std::string build_executor_prompt(const MultimodalQuery& query, std::string_view results_block,
                                  const std::vector<std::string>& prior_answers) {
  std::string p;
  p += "You are the Executor of a protein search agent.\n";
  p += "Analyse the ranked search results for the query and decide whether they suffice.\n\n";
  p += "Query: " + query.text + "\n";
  p += render_sequence_block(query.sequence) + "\n\n";
  if (!prior_answers.empty()) {
    p += "Conclusions from previous rounds:\n";
    for (std::size_t i = 0; i < prior_answers.size(); ++i)
      p += "Round " + std::to_string(i + 1) + ": " + prior_answers[i] + "\n";
    p += "\n";
  }
  p += "Search results:\n";
  p += results_block;
  p += "\n\n";
  p += protocol::kExecutorFormatInstruction;
  p += "\n";
  return p;
}

std::string build_relevance_judge_prompt(const MultimodalQuery& query, const SearchResult& result) {
  std::string p;
  p += "Rate how relevant the search result is to the protein query.\n";
  p += "Reply with a single number between 0 and 1.\n\n";
  p += "Query: " + query.text + "\n";
  p += render_sequence_block(query.sequence) + "\n";
  p += "Result source: " + std::string(to_string(result.source)) + "\n";
  p += "Result id: " + result.doc_id + "\n";
  p += "Result title: " + result.title + "\n";
  p += "Result snippet: " + result.snippet + "\n";
  return p;
}

std::string build_answer_judge_prompt(std::string_view predicted, std::string_view gt) {
  std::string p;
  p += "Score the semantic similarity between the predicted answer and the reference answer.\n";
  p += "Reply with a single number between 0 and 1.\n\n";
  p += "Reference answer: " + std::string(gt) + "\n";
  p += "Predicted answer: " + std::string(predicted) + "\n";
  return p;
}

double parse_judgment(std::string_view s) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto c = static_cast<unsigned char>(s[i]);
    const bool digit_here = std::isdigit(c) != 0;
    const bool dot_digit = c == '.' && i + 1 < s.size() && std::isdigit(static_cast<unsigned char>(s[i + 1]));
    if (!digit_here && !dot_digit) continue;
    std::size_t end = i;
    while (end < s.size() && std::isdigit(static_cast<unsigned char>(s[end]))) ++end;
    if (end < s.size() && s[end] == '.' && end + 1 < s.size() &&
        std::isdigit(static_cast<unsigned char>(s[end + 1]))) {
      ++end;
      while (end < s.size() && std::isdigit(static_cast<unsigned char>(s[end]))) ++end;
    }
    double value = std::strtod(std::string(s.substr(i, end - i)).c_str(), nullptr);
    const bool negative = i > 0 && s[i - 1] == '-' &&
                          (i == 1 || !std::isalnum(static_cast<unsigned char>(s[i - 2])));
    if (negative) value = -value;
    if (!std::isfinite(value)) break;
    return std::clamp(value, 0.0, 1.0);
  }
  throw Error(ErrorCode::UnparseableJudgment, "no numeric score in \"" + text::truncate_utf8(s, 200) + "\"");
}

// ---------------------------------------------------------------------------
// Gateway

GenerationResponse Gateway::generate(Role role, std::string prompt) const {
  if (prompt.empty()) throw Error(ErrorCode::InvalidArgument, "empty prompt");
  int max_tokens = limits_.planner_max_tokens;
  switch (role) {
    case Role::Planner: max_tokens = limits_.planner_max_tokens; break;
    case Role::Executor: max_tokens = limits_.executor_max_tokens; break;
    case Role::JudgeRelevance:
    case Role::JudgeAnswer: max_tokens = limits_.judge_max_tokens; break;
    case Role::Generator: max_tokens = limits_.generator_max_tokens; break;
  }
  return backend_->generate({role, std::move(prompt), max_tokens});
}

Judgment Gateway::judge_relevance(const MultimodalQuery& query, const SearchResult& result) const {
  auto res = generate(Role::JudgeRelevance, build_relevance_judge_prompt(query, result));
  return {parse_judgment(res.text), res.usage};
}

Judgment Gateway::judge_answer(std::string_view predicted, std::string_view gt) const {
  if (text::trim(predicted).empty()) return {0.0, {}};
  auto res = generate(Role::JudgeAnswer, build_answer_judge_prompt(predicted, gt));
  return {parse_judgment(res.text), res.usage};
}

}  // namespace protrl
