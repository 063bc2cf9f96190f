#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "protrl/domain.hpp"
#include "protrl/gateway.hpp"

namespace protrl {

struct RewardConfig {
  RewardWeights weights;
  double tau = 0.7;         // answer-similarity threshold, inclusive
  double kw_penalty = 0.25;  // weight of the extraneous-keyword fraction

  void validate() const;
};

/// +1 when the judged similarity s >= tau, else -1.
double answer_reward_from_similarity(double similarity, double tau);
double answer_reward(const Gateway& gateway, std::string_view predicted, std::string_view gt_answer,
                     const RewardConfig& config);

/// Round-1 keyword score: |P∩G|/|G| - kw_penalty * |P∖G| / max(1,|P|),
/// clamped to [-1, 1]; P and G are normalized keyword sets. A missing
/// (unparseable) plan scores -1.
double keywords_reward(const SearchPlan* plan_round1, const GroundTruth& gt, const RewardConfig& config);

/// Fraction of GT tool assignments reproduced by the round-1 plan. A GT
/// keyword counts only if every plan node carrying it uses the GT tool.
/// A missing (unparseable) plan scores -1.
double tool_reward(const SearchPlan* plan_round1, const GroundTruth& gt);

/// +1 iff the list is non-empty and every output passes check_format.
double format_reward(const std::vector<RawOutput>& raw_outputs);

/// Weighted total of four already-computed sub-rewards.
RewardBreakdown combine_rewards(double r_ans, double r_kw, double r_tool, double r_fmt, const RewardWeights& weights);

/// The round-1 plan: from the first round record, or else recovered from
/// the last parseable round-1 planner output. nullopt when neither exists
/// or the recorded plan fails validation.
std::optional<SearchPlan> round1_plan(const EpisodeTrace& trace);

RewardBreakdown total_reward(const EpisodeTrace& trace, const std::vector<RawOutput>& raw_outputs,
                             const GroundTruth& gt, const RewardConfig& config, const Gateway& gateway);

/// GT bundle JSONL: {"episode_id","answer","keywords":[...],"tool_map":{kw:tool}}.
std::map<std::string, GroundTruth> load_ground_truth(const std::filesystem::path& path);

/// Scores every trace line (paired by episode_id) and, when `out_path` is
/// non-empty, writes each input trace with an added "reward" object.
/// Already-annotated input is rejected with SchemaMismatch.
std::vector<std::pair<std::string, RewardBreakdown>> score_episode_file(const std::filesystem::path& traces_path,
                                                                        const std::filesystem::path& gt_path,
                                                                        const RewardConfig& config,
                                                                        const Gateway& gateway,
                                                                        const std::filesystem::path& out_path = {});

}  // namespace protrl
