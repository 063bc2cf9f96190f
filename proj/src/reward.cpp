#include "protrl/reward.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "protrl/plan.hpp"
#include "protrl/protocol.hpp"
#include "protrl/serialization.hpp"

namespace protrl {

void RewardConfig::validate() const {
  weights.validate();
  if (!(tau > 0.0 && tau < 1.0)) throw Error(ErrorCode::ConfigError, "reward.tau must be in (0,1)");
  if (!(kw_penalty >= 0.0) || !std::isfinite(kw_penalty))
    throw Error(ErrorCode::ConfigError, "reward.kw_penalty must be >= 0");
}

double answer_reward_from_similarity(double similarity, double tau) { return similarity >= tau ? 1.0 : -1.0; }

double answer_reward(const Gateway& gateway, std::string_view predicted, std::string_view gt_answer,
                     const RewardConfig& config) {
  return answer_reward_from_similarity(gateway.judge_answer(predicted, gt_answer).score, config.tau);
}

namespace {

std::set<std::string> plan_keywords(const SearchPlan& plan) {
  std::set<std::string> out;
  for (const auto& n : plan.nodes) {
    try {
      out.insert(normalize_keyword(n.keyword));
    } catch (const Error&) {
      // blank keywords cannot match anything
    }
  }
  return out;
}

}  // namespace

double keywords_reward(const SearchPlan* plan, const GroundTruth& gt, const RewardConfig& config) {
  if (!plan) return -1.0;
  if (gt.keywords.empty()) throw Error(ErrorCode::InvalidArgument, "ground truth has no keywords");
  const auto predicted = plan_keywords(*plan);
  std::size_t hit = 0;
  for (const auto& k : predicted) hit += gt.keywords.count(k);
  const auto extra = predicted.size() - hit;
  const double r = static_cast<double>(hit) / static_cast<double>(gt.keywords.size()) -
                   config.kw_penalty * static_cast<double>(extra) /
                       static_cast<double>(std::max<std::size_t>(1, predicted.size()));
  return std::clamp(r, -1.0, 1.0);
}

double tool_reward(const SearchPlan* plan, const GroundTruth& gt) {
  if (!plan) return -1.0;
  if (gt.tool_map.empty()) throw Error(ErrorCode::InvalidArgument, "ground truth has no tool allocation");
  std::size_t matches = 0;
  for (const auto& [keyword, tool] : gt.tool_map) {
    bool present = false;
    bool all_match = true;
    for (const auto& n : plan->nodes) {
      std::string nk;
      try {
        nk = normalize_keyword(n.keyword);
      } catch (const Error&) {
        continue;
      }
      if (nk != keyword) continue;
      present = true;
      all_match = all_match && n.tool == tool;
    }
    if (present && all_match) ++matches;
  }
  return static_cast<double>(matches) / static_cast<double>(gt.tool_map.size());
}

double format_reward(const std::vector<RawOutput>& raw_outputs) {
  if (raw_outputs.empty()) return -1.0;
  for (const auto& o : raw_outputs)
    if (!protocol::check_format(o.text, o.stage).valid) return -1.0;
  return 1.0;
}

RewardBreakdown combine_rewards(double r_ans, double r_kw, double r_tool, double r_fmt, const RewardWeights& w) {
  RewardBreakdown b;
  b.r_ans = r_ans;
  b.r_kw = r_kw;
  b.r_tool = r_tool;
  b.r_fmt = r_fmt;
  b.weights = w;
  b.r_total = w.lambda_ans * r_ans + w.lambda_kw * r_kw + w.lambda_tool * r_tool + w.lambda_fmt * r_fmt;
  return b;
}

std::optional<SearchPlan> round1_plan(const EpisodeTrace& trace) {
  if (!trace.rounds.empty() && trace.rounds.front().index == 1) {
    // a recorded plan that fails validation is as malformed as an unparseable one
    const auto& plan = trace.rounds.front().plan;
    if (!validate_plan(plan).valid) return std::nullopt;
    return plan;
  }
  std::optional<SearchPlan> plan;
  for (const auto& o : trace.raw_outputs) {
    if (o.round != 1 || o.stage != Stage::Planner) continue;
    try {
      plan = protocol::parse_planner_output(o.text);
    } catch (const Error&) {
    }
  }
  return plan;
}

RewardBreakdown total_reward(const EpisodeTrace& trace, const std::vector<RawOutput>& raw_outputs,
                             const GroundTruth& gt, const RewardConfig& config, const Gateway& gateway) {
  const auto plan = round1_plan(trace);
  const SearchPlan* p = plan ? &*plan : nullptr;
  return combine_rewards(answer_reward(gateway, trace.final_answer, gt.answer, config),
                         keywords_reward(p, gt, config), tool_reward(p, gt), format_reward(raw_outputs),
                         config.weights);
}

std::map<std::string, GroundTruth> load_ground_truth(const std::filesystem::path& path) {
  std::map<std::string, GroundTruth> out;
  for (const auto& [line_no, line] : read_lines(path)) {
    const auto where = path.string() + ":" + std::to_string(line_no);
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::SchemaMismatch, where + ": not a JSON object");
    try {
      auto id = j.at("episode_id").get<std::string>();
      auto gt = j.get<GroundTruth>();
      if (gt.keywords.empty()) throw Error(ErrorCode::SchemaMismatch, where + ": keywords is empty");
      if (!out.emplace(id, std::move(gt)).second)
        throw Error(ErrorCode::SchemaMismatch, where + ": duplicate episode_id " + id);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::SchemaMismatch, where + ": " + e.what());
    } catch (const Error& e) {
      if (e.code() == ErrorCode::SchemaMismatch) throw;
      throw Error(ErrorCode::SchemaMismatch, where + ": " + e.what());
    }
  }
  return out;
}

std::vector<std::pair<std::string, RewardBreakdown>> score_episode_file(const std::filesystem::path& traces_path,
                                                                        const std::filesystem::path& gt_path,
                                                                        const RewardConfig& config,
                                                                        const Gateway& gateway,
                                                                        const std::filesystem::path& out_path) {
  config.validate();
  const auto gts = load_ground_truth(gt_path);

  struct Item {
    json raw;
    EpisodeTrace trace;
  };
  std::vector<Item> items;
  for (const auto& [line_no, line] : read_lines(traces_path)) {
    const auto where = traces_path.string() + ":" + std::to_string(line_no);
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::SchemaMismatch, where + ": not a JSON object");
    if (j.contains("reward")) throw Error(ErrorCode::SchemaMismatch, where + ": trace is already annotated with a reward");
    EpisodeTrace t;
    try {
      t = trace_from_json(j);
    } catch (const Error& e) {
      throw Error(ErrorCode::SchemaMismatch, where + ": " + e.what());
    }
    if (auto v = validate_trace(t); !v.empty())
      throw Error(ErrorCode::SchemaMismatch, where + ": invalid trace: " + v.front().message);
    if (!gts.count(t.episode_id))
      throw Error(ErrorCode::MissingGroundTruth, "no ground truth for episode_id " + t.episode_id);
    items.push_back({std::move(j), std::move(t)});
  }

  std::vector<std::pair<std::string, RewardBreakdown>> out;
  std::string annotated;
  for (auto& item : items) {
    auto b = total_reward(item.trace, item.trace.raw_outputs, gts.at(item.trace.episode_id), config, gateway);
    item.raw["reward"] = b;
    annotated += item.raw.dump() + "\n";
    out.emplace_back(item.trace.episode_id, b);
  }
  if (!out_path.empty()) write_file(out_path, annotated);
  return out;
}

}  // namespace protrl
