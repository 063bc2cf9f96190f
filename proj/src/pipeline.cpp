#include "protrl/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <cstdio>
#include <sstream>

#include "protrl/http.hpp"
#include "protrl/plan.hpp"
#include "protrl/protocol.hpp"
#include "protrl/serialization.hpp"
#include "protrl/text.hpp"

namespace protrl {

std::string_view to_string(ProteinCategory c) {
  switch (c) {
    case ProteinCategory::TranscriptionFactor: return "transcription_factor";
    case ProteinCategory::ProteinRegulator: return "protein_regulator";
    case ProteinCategory::IonChannelTransporter: return "ion_channel_transporter";
    case ProteinCategory::SignalingInflammation: return "signaling_inflammation";
    case ProteinCategory::SynapticNeurodevelopmental: return "synaptic_neurodevelopmental";
    case ProteinCategory::Mitochondrial: return "mitochondrial";
  }
  return "";
}

std::string_view to_string(ReasoningTask t) {
  switch (t) {
    case ReasoningTask::VariantToPhenotype: return "variant_to_phenotype";
    case ReasoningTask::StructureToFunction: return "structure_to_function";
    case ReasoningTask::CrossSystemMechanism: return "cross_system_mechanism";
    case ReasoningTask::CrossSpeciesComparison: return "cross_species_comparison";
  }
  return "";
}

ProteinCategory parse_category(std::string_view s) {
  for (auto c : kAllCategories)
    if (to_string(c) == s) return c;
  throw Error(ErrorCode::InvalidArgument, "unknown protein category \"" + std::string(s) + "\"");
}

ReasoningTask parse_task(std::string_view s) {
  for (auto t : kAllTasks)
    if (to_string(t) == s) return t;
  throw Error(ErrorCode::InvalidArgument, "unknown reasoning task \"" + std::string(s) + "\"");
}

// ---------------------------------------------------------------------------
// Entries

json ReplayEntrySource::fetch(std::string_view accession) {
  const auto path = dir_ / (std::string(accession) + ".json");
  if (!std::filesystem::exists(path))
    throw Error(ErrorCode::NotFound, "no recorded entry for accession " + std::string(accession));
  json j = json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::SchemaViolation, path.string() + " is not JSON");
  return j;
}

json LiveEntrySource::fetch(std::string_view accession) {
  const auto url = base_ + "/uniprotkb/" + http::url_encode(accession) + ".json";
  auto res = http::get(url, {}, timeout_s_);
  if (res.status == 404 || res.status == 400)
    throw Error(ErrorCode::NotFound, "UniProt has no entry " + std::string(accession));
  if (!res.ok())
    throw Error(ErrorCode::SourceUnavailable,
                "UniProt: " + (res.status == 0 ? res.error : "HTTP " + std::to_string(res.status)));
  json j = json::parse(res.body, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::SourceUnavailable, "UniProt returned non-JSON");
  return j;
}

ReviewedEntry parse_reviewed_entry(const json& entry, std::string_view accession, std::string_view species) {
  const auto acc = entry.value("primaryAccession", "");
  if (acc.empty() || text::to_upper(acc) != text::to_upper(text::trim(accession)))
    throw Error(ErrorCode::NotFound, "entry does not describe accession " + std::string(accession));
  const auto type = entry.value("entryType", "");
  if (!text::starts_with_ci(type, "UniProtKB reviewed"))
    throw Error(ErrorCode::NotReviewed, acc + " is not a reviewed entry (" + type + ")");

  const auto& org = entry.contains("organism") ? entry["organism"] : json::object();
  const auto scientific = org.value("scientificName", "");
  const auto common = org.value("commonName", "");
  const auto want = text::collapse_whitespace_lower(species);
  if (want != text::collapse_whitespace_lower(scientific) && want != text::collapse_whitespace_lower(common))
    throw Error(ErrorCode::NotFound, acc + " belongs to " + scientific + ", not " + std::string(species));

  std::string raw_seq;
  if (entry.contains("sequence") && entry["sequence"].is_object()) raw_seq = entry["sequence"].value("value", "");
  auto seq = validate_sequence(raw_seq);

  std::string name;
  if (auto pd = entry.find("proteinDescription"); pd != entry.end() && pd->contains("recommendedName"))
    name = (*pd)["recommendedName"]["fullName"].value("value", "");
  std::string function;
  for (const auto& c : entry.value("comments", json::array())) {
    if (c.value("commentType", "") != "FUNCTION") continue;
    for (const auto& t : c.value("texts", json::array()))
      function += (function.empty() ? "" : " ") + t.value("value", "");
  }
  return ReviewedEntry{acc, scientific, std::move(seq), std::move(name), std::move(function)};
}

ReviewedEntry fetch_reviewed_entry(EntrySource& source, std::string_view accession, std::string_view species) {
  if (text::trim(accession).empty()) throw Error(ErrorCode::InvalidArgument, "accession is empty");
  return parse_reviewed_entry(source.fetch(text::trim(accession)), accession, species);
}

// ---------------------------------------------------------------------------
// Samples

GroundTruth ground_truth_from_plan(const SearchPlan& plan, std::string answer) {
  std::vector<std::string> keywords;
  std::vector<std::pair<std::string, SearchTool>> tools;
  std::set<std::string> seen;
  for (const auto& n : plan.nodes) {
    auto k = normalize_keyword(n.keyword);
    keywords.push_back(k);
    if (seen.insert(k).second) tools.emplace_back(k, n.tool);
  }
  return GroundTruth::make(std::move(answer), keywords, tools);
}

std::vector<Violation> validate_sample(const TrainingSample& s) {
  FormatVerdict v;
  if (s.accession.empty()) v.add(ErrorCode::SchemaViolation, "accession is empty");
  if (text::trim(s.query).empty()) v.add(ErrorCode::SchemaViolation, "query is empty");
  if (s.gt.keywords.empty()) v.add(ErrorCode::SchemaViolation, "gt.keywords is empty");
  for (const auto& viol : validate_plan(s.dag).violations) v.add(ErrorCode::SchemaViolation, "dag: " + viol.message);
  if (v.violations.empty()) {
    try {
      if (!(ground_truth_from_plan(s.dag, s.gt.answer) == s.gt))
        v.add(ErrorCode::SchemaViolation, "gt keywords/tool_map disagree with the DAG");
    } catch (const Error& e) {
      v.add(ErrorCode::SchemaViolation, e.what());
    }
  }
  if (s.gt.answer != s.answer) v.add(ErrorCode::SchemaViolation, "gt.answer differs from answer");
  return v.violations;
}

json sample_to_json(const TrainingSample& s) {
  return json{{"schema", kSampleSchema},
              {"accession", s.accession},
              {"species", s.species},
              {"sequence", s.sequence.residues()},
              {"category", to_string(s.category)},
              {"task", to_string(s.task)},
              {"query", s.query},
              {"dag", s.dag},
              {"gt", s.gt},
              {"literature_refs", s.literature_refs},
              {"reason", s.reason},
              {"answer", s.answer}};
}

TrainingSample sample_from_json(const json& j) {
  if (j.value("schema", "") != kSampleSchema)
    throw Error(ErrorCode::SchemaMismatch, "expected schema \"" + std::string(kSampleSchema) + "\"");
  try {
    TrainingSample s{j.at("accession").get<std::string>(),
                     j.at("species").get<std::string>(),
                     validate_sequence(j.at("sequence").get<std::string>()),
                     parse_category(j.at("category").get<std::string>()),
                     parse_task(j.at("task").get<std::string>()),
                     j.at("query").get<std::string>(),
                     j.at("dag").get<SearchPlan>(),
                     j.at("gt").get<GroundTruth>(),
                     j.at("literature_refs").get<std::vector<std::string>>(),
                     j.at("reason").get<std::string>(),
                     j.at("answer").get<std::string>()};
    if (auto v = validate_sample(s); !v.empty()) throw Error(ErrorCode::SchemaViolation, v.front().message);
    return s;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, std::string("sample: ") + e.what());
  }
}

std::string build_generator_prompt(const ReviewedEntry& entry, ProteinCategory category, ReasoningTask task,
                                   const std::vector<SearchResult>& literature) {
  std::string p;
  p += "You build training samples for a protein search agent.\n";
  p += "Protein: " + (entry.protein_name.empty() ? entry.accession : entry.protein_name) + " (" + entry.accession +
       ", " + entry.species + ")\n";
  p += "Category: " + std::string(to_string(category)) + "\n";
  p += "Reasoning task: " + std::string(to_string(task)) + "\n";
  p += render_sequence_block(entry.sequence) + "\n";
  if (!entry.function.empty()) p += "Reviewed function annotation: " + entry.function + "\n";
  p += "\nLiterature:\n";
  for (const auto& r : literature) p += "- [" + r.doc_id + "] " + r.title + ": " + r.snippet + "\n";
  p += "\nWrite a research query in <query>...</query>, a search plan in <DAG>...</DAG>, "
       "the reasoning in <reason>...</reason> and the answer in <answer>...</answer>.\n";
  p += protocol::kPlannerFormatInstruction;
  p += "\n";
  return p;
}

FormatVerdict check_generator_output(std::string_view text) {
  auto v = protocol::check_format(text, Stage::Planner);
  auto q = protocol::extract_single(text, "query");
  if (!q || text::trim(*q).empty()) v.add(ErrorCode::MissingTag, "<query> is missing, repeated or empty");
  FormatVerdict structural;
  auto blocks = protocol::scan_blocks(text, structural);
  for (std::string_view tag : {"reason", "answer"}) {
    auto n = std::count_if(blocks.begin(), blocks.end(), [&](auto& b) { return b.tag == tag; });
    auto it = std::find_if(blocks.begin(), blocks.end(), [&](auto& b) { return b.tag == tag; });
    if (n == 0) v.add(ErrorCode::MissingTag, "<" + std::string(tag) + "> is missing");
    else if (n > 1) v.add(ErrorCode::DuplicateTag, "<" + std::string(tag) + "> is repeated");
    else if (text::trim(it->body).empty()) v.add(ErrorCode::MalformedBody, "<" + std::string(tag) + "> is empty");
  }
  return v;
}

TrainingSample SampleBuilder::build_sample(std::string_view accession, std::string_view species,
                                           ProteinCategory category, ReasoningTask task) const {
  auto entry = fetch_reviewed_entry(entries_, accession, species);
  const auto lit_query = entry.protein_name.empty() ? entry.accession : entry.protein_name;
  auto literature = literature_.search(lit_query, config_.literature_limit);

  const auto base = build_generator_prompt(entry, category, task, literature);
  auto prompt = base;
  FormatVerdict verdict;
  for (int attempt = 0; attempt <= config_.repair_retries; ++attempt) {
    auto res = gateway_.generate(Role::Generator, prompt);
    verdict = check_generator_output(res.text);
    if (verdict.valid) {
      auto dag = protocol::parse_planner_output(res.text);
      FormatVerdict scratch;
      auto blocks = protocol::scan_blocks(res.text, scratch);
      auto body = [&](std::string_view tag) {
        return text::trim(std::find_if(blocks.begin(), blocks.end(), [&](auto& b) { return b.tag == tag; })->body);
      };
      auto answer = body("answer");
      std::vector<std::string> refs;
      for (const auto& r : literature) refs.push_back(r.doc_id);
      TrainingSample s{entry.accession,
                       entry.species,
                       entry.sequence,
                       category,
                       task,
                       text::trim(*protocol::extract_single(res.text, "query")),
                       dag,
                       ground_truth_from_plan(dag, answer),
                       std::move(refs),
                       body("reason"),
                       answer};
      if (auto v = validate_sample(s); !v.empty())
        throw Error(ErrorCode::GenerationRejected, "sample failed its invariants: " + v.front().message);
      return s;
    }
    prompt = base + "\nYour previous output was rejected:\n";
    for (const auto& v : verdict.violations) prompt += "- " + v.code + ": " + v.message + "\n";
  }
  throw Error(ErrorCode::GenerationRejected, "generator output for " + entry.accession + " stayed invalid", verdict);
}

std::size_t export_samples(const std::vector<TrainingSample>& samples, const std::filesystem::path& path) {
  std::string out;
  for (const auto& s : samples) {
    if (auto v = validate_sample(s); !v.empty())
      throw Error(ErrorCode::SchemaViolation, "sample " + s.accession + ": " + v.front().message);
    out += sample_to_json(s).dump() + "\n";
  }
  write_file(path, out);
  return samples.size();
}

std::vector<TrainingSample> import_samples(const std::filesystem::path& path) {
  std::vector<TrainingSample> out;
  for (const auto& [line_no, line] : read_lines(path)) {
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw Error(ErrorCode::SchemaViolation, path.string() + ":" + std::to_string(line_no) + ": not JSON");
    out.push_back(sample_from_json(j));
  }
  return out;
}

DistributionReport distribution_report(const std::vector<TrainingSample>& samples, double tolerance) {
  DistributionReport r;
  r.total = samples.size();
  for (auto c : kAllCategories) r.by_category[c] = 0;
  for (auto t : kAllTasks) r.by_task[t] = 0;
  for (const auto& s : samples) {
    ++r.by_category[s.category];
    ++r.by_task[s.task];
  }
  if (r.total == 0) return r;
  const double uniform = 1.0 / static_cast<double>(kAllTasks.size());
  for (auto t : kAllTasks) {
    const double share = static_cast<double>(r.by_task[t]) / static_cast<double>(r.total);
    if (std::abs(share - uniform) > tolerance) r.flagged_tasks.push_back(t);
  }
  return r;
}

std::string DistributionReport::to_table() const {
  std::ostringstream os;
  char buf[128];
  os << "category                       count\n";
  for (const auto& [c, n] : by_category) {
    std::snprintf(buf, sizeof buf, "%-30s %5zu\n", std::string(to_string(c)).c_str(), n);
    os << buf;
  }
  os << "task                           count  flag\n";
  for (const auto& [t, n] : by_task) {
    const bool flagged = std::find(flagged_tasks.begin(), flagged_tasks.end(), t) != flagged_tasks.end();
    std::snprintf(buf, sizeof buf, "%-30s %5zu  %s\n", std::string(to_string(t)).c_str(), n, flagged ? "UNBALANCED" : "");
    os << buf;
  }
  os << "total " << total << "\n";
  return os.str();
}

}  // namespace protrl
