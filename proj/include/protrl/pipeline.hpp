#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "protrl/domain.hpp"
#include "protrl/gateway.hpp"
#include "protrl/sources.hpp"

namespace protrl {

inline constexpr std::string_view kSampleSchema = "protrlsearch.sample.v1";

enum class ProteinCategory {
  TranscriptionFactor,
  ProteinRegulator,
  IonChannelTransporter,
  SignalingInflammation,
  SynapticNeurodevelopmental,
  Mitochondrial,
};
inline constexpr std::array kAllCategories = {
    ProteinCategory::TranscriptionFactor,   ProteinCategory::ProteinRegulator,
    ProteinCategory::IonChannelTransporter, ProteinCategory::SignalingInflammation,
    ProteinCategory::SynapticNeurodevelopmental, ProteinCategory::Mitochondrial};

enum class ReasoningTask { VariantToPhenotype, StructureToFunction, CrossSystemMechanism, CrossSpeciesComparison };
inline constexpr std::array kAllTasks = {ReasoningTask::VariantToPhenotype, ReasoningTask::StructureToFunction,
                                         ReasoningTask::CrossSystemMechanism, ReasoningTask::CrossSpeciesComparison};

std::string_view to_string(ProteinCategory c);
std::string_view to_string(ReasoningTask t);
ProteinCategory parse_category(std::string_view s);
ReasoningTask parse_task(std::string_view s);

struct ReviewedEntry {
  std::string accession;
  std::string species;
  ProteinSequence sequence;
  std::string protein_name;
  std::string function;
};

/// Source of UniProt-shaped entry JSON (as served by /uniprotkb/<acc>.json).
class EntrySource {
 public:
  virtual ~EntrySource() = default;
  /// Throws NotFound for unknown accessions, SourceUnavailable otherwise.
  virtual nlohmann::json fetch(std::string_view accession) = 0;
};

/// Reads <dir>/<ACCESSION>.json; never touches the network.
class ReplayEntrySource : public EntrySource {
 public:
  explicit ReplayEntrySource(std::filesystem::path dir) : dir_(std::move(dir)) {}
  nlohmann::json fetch(std::string_view accession) override;

 private:
  std::filesystem::path dir_;
};

class LiveEntrySource : public EntrySource {
 public:
  explicit LiveEntrySource(std::string uniprot_base, double timeout_s = 20)
      : base_(std::move(uniprot_base)), timeout_s_(timeout_s) {}
  nlohmann::json fetch(std::string_view accession) override;

 private:
  std::string base_;
  double timeout_s_;
};

/// Accepts only Swiss-Prot (reviewed) entries whose organism matches
/// `species` (scientific or common name, case-insensitive).
/// Errors: NotReviewed, NotFound, plus sequence validation errors.
ReviewedEntry parse_reviewed_entry(const nlohmann::json& entry, std::string_view accession, std::string_view species);
ReviewedEntry fetch_reviewed_entry(EntrySource& source, std::string_view accession, std::string_view species);

struct TrainingSample {
  std::string accession;
  std::string species;
  ProteinSequence sequence;
  ProteinCategory category = ProteinCategory::TranscriptionFactor;
  ReasoningTask task = ReasoningTask::VariantToPhenotype;
  std::string query;
  SearchPlan dag;
  GroundTruth gt;
  std::vector<std::string> literature_refs;
  std::string reason;
  std::string answer;

  bool operator==(const TrainingSample&) const = default;
};

/// keywords = normalized DAG keywords, tool_map = first assignment per keyword.
GroundTruth ground_truth_from_plan(const SearchPlan& plan, std::string answer);

/// Checks the sample invariants, including GT/DAG consistency.
std::vector<Violation> validate_sample(const TrainingSample& s);

nlohmann::json sample_to_json(const TrainingSample& s);
TrainingSample sample_from_json(const nlohmann::json& j);

struct PipelineConfig {
  int repair_retries = 1;
  std::size_t literature_limit = 5;
};

std::string build_generator_prompt(const ReviewedEntry& entry, ProteinCategory category, ReasoningTask task,
                                   const std::vector<SearchResult>& literature);

/// Checks a generator reply: one <query>, a valid <DAG>, one non-empty
/// <reason> and <answer>.
FormatVerdict check_generator_output(std::string_view text);

class SampleBuilder {
 public:
  SampleBuilder(const Gateway& gateway, EntrySource& entries, SourceClient& literature, PipelineConfig config = {})
      : gateway_(gateway), entries_(entries), literature_(literature), config_(config) {}

  /// Throws GenerationRejected (with the verdict) when the reply stays
  /// invalid after the repair retries.
  TrainingSample build_sample(std::string_view accession, std::string_view species, ProteinCategory category,
                              ReasoningTask task) const;

 private:
  const Gateway& gateway_;
  EntrySource& entries_;
  SourceClient& literature_;
  PipelineConfig config_;
};

std::size_t export_samples(const std::vector<TrainingSample>& samples, const std::filesystem::path& path);
std::vector<TrainingSample> import_samples(const std::filesystem::path& path);

struct DistributionReport {
  std::size_t total = 0;
  std::map<ProteinCategory, std::size_t> by_category;
  std::map<ReasoningTask, std::size_t> by_task;
  std::vector<ReasoningTask> flagged_tasks;  // share deviates from 1/4 by more than the tolerance

  std::string to_table() const;
};

DistributionReport distribution_report(const std::vector<TrainingSample>& samples, double tolerance = 0.1);

}  // namespace protrl
