#pragma once

#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "protrl/domain.hpp"

namespace protrl {

enum class Role { Planner, Executor, JudgeRelevance, JudgeAnswer, Generator };

std::string_view to_string(Role role);
Role parse_role(std::string_view name);

struct GenerationRequest {
  Role role = Role::Planner;
  std::string prompt;
  int max_tokens = 1024;
};

struct GenerationResponse {
  std::string text;
  Usage usage;
};

/// Text-generation backend. Implementations must be safe for concurrent
/// generate() calls.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual GenerationResponse generate(const GenerationRequest& request) = 0;
};

/// Manifest key: "<role>:<16 hex digits of FNV-1a 64 over the prompt>".
std::string script_key(Role role, std::string_view prompt);

/// Replays a manifest `{key: {"text", "prompt_tokens"?, "completion_tokens"?}}`.
/// Missing token counts default to whitespace word counts of prompt/text.
class ScriptedBackend : public Backend {
 public:
  explicit ScriptedBackend(const nlohmann::json& manifest);
  static std::shared_ptr<ScriptedBackend> from_file(const std::filesystem::path& path);

  GenerationResponse generate(const GenerationRequest& request) override;
  std::size_t size() const noexcept { return entries_.size(); }

 private:
  struct Entry {
    std::string text;
    std::optional<std::int64_t> prompt_tokens;
    std::optional<std::int64_t> completion_tokens;
  };
  std::map<std::string, Entry> entries_;
};

struct RemoteBackendConfig {
  std::string url;
  std::string auth_token;  // resolved from the configured env var
  double timeout_s = 60;
};

/// POST {"role","prompt","max_tokens"} -> {"text","prompt_tokens","completion_tokens"}
class RemoteBackend : public Backend {
 public:
  explicit RemoteBackend(RemoteBackendConfig config) : config_(std::move(config)) {}
  GenerationResponse generate(const GenerationRequest& request) override;

 private:
  RemoteBackendConfig config_;
};

/// Fixture-authoring backend. Planner/executor/generator replies are
/// consumed in order; judge replies are picked by the first rule whose
/// `contains` substring occurs in the prompt, else `default`.
///
///   {"planner": ["<DAG>...</DAG>"], "executor": ["..."], "generator": [],
///    "judge_relevance": {"default": "0.5", "rules": [{"contains": "P04637", "reply": "0.9"}]},
///    "judge_answer": {"default": "1.0"}}
class ScenarioBackend : public Backend {
 public:
  explicit ScenarioBackend(const nlohmann::json& scenario);
  GenerationResponse generate(const GenerationRequest& request) override;

 private:
  struct Rule {
    std::string contains;
    std::string reply;
  };
  struct JudgeScript {
    std::string fallback = "0.5";
    std::vector<Rule> rules;
  };
  std::mutex mu_;
  std::map<Role, std::deque<std::string>> queues_;
  std::map<Role, JudgeScript> judges_;
};

/// Forwards to an inner backend and records every exchange as a
/// ScriptedBackend manifest. Throws InvalidArgument if one key would
/// need two different replies.
class RecordingBackend : public Backend {
 public:
  explicit RecordingBackend(std::shared_ptr<Backend> inner) : inner_(std::move(inner)) {}
  GenerationResponse generate(const GenerationRequest& request) override;
  nlohmann::json manifest() const;

 private:
  std::shared_ptr<Backend> inner_;
  mutable std::mutex mu_;
  nlohmann::json manifest_ = nlohmann::json::object();
};

/// Sequence rendering for prompts: full residues up to 320, otherwise the
/// first 256 and last 64 with a length note. Without a sequence, the
/// explicit marker kNoSequenceMarker.
inline constexpr std::string_view kNoSequenceMarker = "No protein sequence provided.";
inline constexpr std::size_t kSequenceHead = 256;
inline constexpr std::size_t kSequenceTail = 64;
std::string render_sequence_block(const std::optional<ProteinSequence>& sequence);

std::string build_planner_prompt(const MultimodalQuery& query, std::string_view sequence_summary);
std::string build_executor_prompt(const MultimodalQuery& query, std::string_view results_block,
                                  const std::vector<std::string>& prior_answers);
std::string build_relevance_judge_prompt(const MultimodalQuery& query, const SearchResult& result);
std::string build_answer_judge_prompt(std::string_view predicted, std::string_view gt);

/// First decimal literal in `text`, clamped to [0,1]. A leading '-' counts
/// only when it is not glued to a preceding word. Throws UnparseableJudgment.
double parse_judgment(std::string_view text);

struct Judgment {
  double score = 0;
  Usage usage;
};

struct GatewayLimits {
  int planner_max_tokens = 1024;
  int executor_max_tokens = 1024;
  int judge_max_tokens = 16;
  int generator_max_tokens = 2048;
};

class Gateway {
 public:
  explicit Gateway(std::shared_ptr<Backend> backend, GatewayLimits limits = {})
      : backend_(std::move(backend)), limits_(limits) {}

  GenerationResponse generate(Role role, std::string prompt) const;

  Judgment judge_relevance(const MultimodalQuery& query, const SearchResult& result) const;
  /// Blank `predicted` short-circuits to 0 without a backend call.
  Judgment judge_answer(std::string_view predicted, std::string_view gt) const;

  Backend& backend() const { return *backend_; }

 private:
  std::shared_ptr<Backend> backend_;
  GatewayLimits limits_;
};

}  // namespace protrl
