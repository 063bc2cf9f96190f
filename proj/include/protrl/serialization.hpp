#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "protrl/domain.hpp"

namespace protrl {

using json = nlohmann::json;

inline constexpr std::string_view kTraceSchema = "protrlsearch.trace.v1";

void to_json(json& j, const PlanNode& n);
void from_json(const json& j, PlanNode& n);
void to_json(json& j, const SearchPlan& p);
void from_json(const json& j, SearchPlan& p);
void to_json(json& j, const SearchResult& r);
void from_json(const json& j, SearchResult& r);
void to_json(json& j, const RankedResults& r);
void from_json(const json& j, RankedResults& r);
void to_json(json& j, const Usage& u);
void from_json(const json& j, Usage& u);
void to_json(json& j, const RoundRecord& r);
void from_json(const json& j, RoundRecord& r);
void to_json(json& j, const RawOutput& r);
void from_json(const json& j, RawOutput& r);
void to_json(json& j, const EpisodeTrace& t);
void from_json(const json& j, EpisodeTrace& t);
void to_json(json& j, const GroundTruth& g);
void from_json(const json& j, GroundTruth& g);
void to_json(json& j, const RewardWeights& w);
void from_json(const json& j, RewardWeights& w);
void to_json(json& j, const RewardBreakdown& b);

/// One trace as a single compact JSON line (no trailing newline).
std::string trace_to_line(const EpisodeTrace& trace);
EpisodeTrace trace_from_json(const json& j);

void append_line(const std::filesystem::path& path, std::string_view line);
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

/// Non-blank lines of a file with their 1-based line numbers.
std::vector<std::pair<std::size_t, std::string>> read_lines(const std::filesystem::path& path);

}  // namespace protrl
