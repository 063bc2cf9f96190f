#include "protrl/controller.hpp"

#include <chrono>

#include "protrl/protocol.hpp"
#include "protrl/text.hpp"

namespace protrl {

void LoopConfig::validate() const {
  if (max_rounds < 1) throw Error(ErrorCode::ConfigError, "loop.max_rounds must be >= 1");
  if (plan_retries < 0) throw Error(ErrorCode::ConfigError, "loop.plan_retries must be >= 0");
}

std::string default_episode_id(const MultimodalQuery& query) {
  std::string key = query.text;
  key += '\n';
  if (query.sequence) key += query.sequence->residues();
  return "ep-" + text::digest_hex(key);
}

RoundController::RoundController(const Gateway& gateway, const Retriever& retriever, LoopConfig config)
    : gateway_(gateway), retriever_(retriever), config_(config), planner_(gateway, config.plan_retries) {
  config_.validate();
}

RoundRecord RoundController::run_round(const MultimodalQuery& query, const std::vector<std::string>& prior_answers,
                                       std::vector<RawOutput>* raw) const {
  const auto started = std::chrono::steady_clock::now();
  RoundRecord rec;
  rec.index = query.round_index;
  rec.query = query.text;

  PlanLog plan_log;
  auto record_plan_outputs = [&] {
    if (!raw) return;
    for (const auto& text : plan_log.outputs) raw->push_back({query.round_index, Stage::Planner, text});
  };
  try {
    rec.plan = planner_.build_plan(query, &plan_log);
  } catch (...) {
    record_plan_outputs();
    throw;
  }
  record_plan_outputs();
  rec.plan_attempts = plan_log.attempts;
  rec.usage += plan_log.usage;

  auto retrieval = retriever_.execute_plan(query, rec.plan);
  rec.results = std::move(retrieval.results);
  rec.usage += retrieval.usage;

  const auto block = protocol::serialize_search_results(rec.results);
  auto exec = gateway_.generate(Role::Executor, build_executor_prompt(query, block, prior_answers));
  rec.usage += exec.usage;
  if (raw) raw->push_back({query.round_index, Stage::Executor, exec.text});

  auto verdict = protocol::check_format(exec.text, Stage::Executor);
  if (!verdict.valid) {
    std::string codes;
    for (const auto& v : verdict.violations) codes += (codes.empty() ? "" : ", ") + v.code;
    throw Error(ErrorCode::ExecutorParseFailure, "executor output invalid: " + codes, verdict);
  }
  auto parsed = protocol::parse_executor_output(exec.text);
  rec.reason = std::move(parsed.reason);
  rec.answer = std::move(parsed.answer);
  rec.decide = parsed.decide;
  rec.next_query = std::move(parsed.next_query);

  if (!config_.freeze_time) {
    rec.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started)
                      .count();
  }
  return rec;
}

EpisodeTrace RoundController::run_episode(const MultimodalQuery& query, std::string episode_id) const {
  if (query.round_index != 1) throw Error(ErrorCode::InvalidQuery, "episodes start at round 1");
  EpisodeTrace trace;
  trace.episode_id = episode_id.empty() ? default_episode_id(query) : std::move(episode_id);
  trace.query = query.text;
  trace.sequence = query.sequence;

  std::vector<std::string> prior_answers;
  auto current = query;
  for (int round = 1; round <= config_.max_rounds; ++round) {
    current.round_index = round;
    try {
      trace.rounds.push_back(run_round(current, prior_answers, &trace.raw_outputs));
    } catch (const Error& e) {
      trace.aborted = true;
      trace.abort = AbortInfo{round, std::string(to_string(e.code())), e.what()};
      break;
    } catch (const std::exception& e) {
      trace.aborted = true;
      trace.abort = AbortInfo{round, "Internal", e.what()};
      break;
    }
    const auto& rec = trace.rounds.back();
    if (rec.decide) break;
    prior_answers.push_back(rec.answer);
    current = MultimodalQuery{*rec.next_query, query.sequence, round + 1};
  }
  trace.exhausted = !trace.aborted && !trace.rounds.empty() && !trace.rounds.back().decide;
  trace.finalize();
  return trace;
}

}  // namespace protrl
