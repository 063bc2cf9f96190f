#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "protrl/controller.hpp"
#include "protrl/domain.hpp"

namespace protrl {

inline constexpr std::string_view kMcqSchema = "protrlsearch.mcq.v1";
inline constexpr std::string_view kBenchReportSchema = "protrlsearch.bench.v1";

struct McqItem {
  std::string id;
  int level = 1;
  std::string question;
  std::optional<ProteinSequence> sequence;
  std::map<char, std::string> options;  // exactly A..D
  char answer_key = 'A';
};

/// One item per non-blank JSONL line:
///   {"schema":"protrlsearch.mcq.v1","id","level","question","sequence"?,
///    "options":{"A":..,"B":..,"C":..,"D":..},"answer_key":"B"}
/// Throws SchemaViolation with position() = 1-based line number.
std::vector<McqItem> load_mcqs(const std::filesystem::path& path);
McqItem mcq_from_json(const nlohmann::json& j);
nlohmann::json mcq_to_json(const McqItem& item);

/// Question followed by the lettered options; this is what the agent sees.
std::string mcq_query_text(const McqItem& item);

/// First standalone A-D letter (case-insensitive, word-bounded), upper-cased.
std::optional<char> extract_label(std::string_view final_answer);
bool grade_answer(std::string_view final_answer, const McqItem& item);

struct ItemOutcome {
  std::string id;
  int level = 1;
  std::string episode_id;
  std::optional<char> chosen;
  bool correct = false;
  std::int64_t tokens = 0;
  double time_s = 0;
  std::optional<std::string> error;
};

struct LevelRow {
  int level = 0;  // 0 = overall
  std::size_t n = 0;
  std::size_t correct = 0;
  double accuracy_percent = 0;
  double mean_tokens = 0;
  double mean_time_s = 0;
};

struct BenchReport {
  std::vector<LevelRow> levels;  // ascending level, only levels with n > 0
  LevelRow overall;
  std::vector<ItemOutcome> items;

  nlohmann::json to_json() const;
  std::string to_table() const;
};

/// Aggregates outcomes (in item order) into per-level and overall rows.
BenchReport aggregate_outcomes(std::vector<ItemOutcome> outcomes);

struct BenchOptions {
  std::size_t workers = 1;
  std::filesystem::path traces_out;  // one trace line per item, item order; empty = not persisted
};

/// Runs one episode per item. Aborted or failed items count as incorrect.
BenchReport run_benchmark(const std::vector<McqItem>& items, const RoundController& controller,
                          const BenchOptions& options = {});

}  // namespace protrl
