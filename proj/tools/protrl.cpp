// protrl: command-line driver for the search-agent engine.
//
// Exit codes: 0 ok (an exhausted round cap is ok), 1 config/usage/input
// error, 2 generation or embedding backend error, 3 episode aborted.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include "protrl/bench.hpp"
#include "protrl/config.hpp"
#include "protrl/pipeline.hpp"
#include "protrl/protocol.hpp"
#include "protrl/reward.hpp"
#include "protrl/serialization.hpp"
#include "protrl/text.hpp"

using namespace protrl;

namespace {

enum Exit { kOk = 0, kConfig = 1, kBackend = 2, kAborted = 3 };

struct Common {
  std::string config_path;
  std::string manifest;
  std::string cassette_dir;
  std::optional<int> max_rounds;
  std::optional<std::size_t> k;
  std::optional<double> alpha;
  bool freeze_time = false;
  // fixture authoring
  std::string scenario;
  std::string record_manifest;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "Engine config (JSON)");
  cmd->add_option("--manifest", c.manifest, "Scripted backend manifest (overrides backend.manifest)");
  cmd->add_option("--cassette-dir", c.cassette_dir, "Cassette directory (overrides retriever.cassette_dir)");
  cmd->add_option("--max-rounds", c.max_rounds, "Round cap (overrides loop.max_rounds)");
  cmd->add_option("--k", c.k, "Results kept per round (overrides retriever.k)");
  cmd->add_option("--alpha", c.alpha, "Vector/judge fusion weight (overrides retriever.alpha)");
  cmd->add_flag("--freeze-time", c.freeze_time, "Zero wall-clock fields in traces");
  cmd->add_option("--scenario", c.scenario, "Drive the run from a scenario script instead of the backend");
  cmd->add_option("--record-manifest", c.record_manifest, "Merge every backend exchange into this manifest");
}

EngineConfig resolve_config(const Common& c) {
  EngineConfig cfg;
  if (!c.config_path.empty()) cfg = load_config(c.config_path);
  if (!c.manifest.empty()) {
    cfg.backend.mode = BackendMode::Scripted;
    cfg.backend.url.clear();
    cfg.backend.manifest = c.manifest;
  }
  if (!c.cassette_dir.empty()) cfg.retrieval.cassette_dir = c.cassette_dir;
  if (c.max_rounds) cfg.loop.max_rounds = *c.max_rounds;
  if (c.k) cfg.retrieval.retriever.k = *c.k;
  if (c.alpha) cfg.retrieval.retriever.alpha = *c.alpha;
  if (c.freeze_time) cfg.loop.freeze_time = true;
  cfg.validate();
  return cfg;
}

// Scenario runs record into a manifest; everything else uses the configured backend.
struct Session {
  EngineConfig config;
  std::shared_ptr<RecordingBackend> recorder;
  Engine engine;
  std::string record_path;

  Session(const Common& c, bool offline) : config(resolve_config(c)), record_path(c.record_manifest) {
    if (offline && config.retrieval.cassette_dir.empty())
      throw Error(ErrorCode::ConfigError, "--offline requires a cassette directory");
    if (!c.scenario.empty()) {
      if (!std::filesystem::is_regular_file(c.scenario))
        throw Error(ErrorCode::ConfigError, "scenario not found: " + c.scenario);
      json scenario = json::parse(read_file(c.scenario), nullptr, false);
      if (scenario.is_discarded()) throw Error(ErrorCode::ConfigError, c.scenario + " is not valid JSON");
      recorder = std::make_shared<RecordingBackend>(std::make_shared<ScenarioBackend>(scenario));
      engine = build_engine(config, recorder, offline);
    } else {
      engine = build_engine(config, offline);
    }
  }

  // Merges the recorded exchanges into record_path.
  void save() const {
    if (!recorder || record_path.empty()) return;
    json merged = json::object();
    if (std::filesystem::exists(record_path)) merged = json::parse(read_file(record_path));
    const auto recorded = recorder->manifest();
    for (const auto& [key, value] : recorded.items()) {
      if (merged.contains(key) && merged[key]["text"] != value["text"])
        throw Error(ErrorCode::InvalidArgument, "manifest key " + key + " already holds a different reply");
      merged[key] = value;
    }
    write_file(record_path, merged.dump(2) + "\n");
  }
};

std::optional<ProteinSequence> read_sequence_file(const std::string& path) {
  if (path.empty()) return std::nullopt;
  if (!std::filesystem::is_regular_file(path)) throw Error(ErrorCode::ConfigError, "sequence file not found: " + path);
  std::istringstream in(read_file(path));
  std::string line, residues;
  while (std::getline(in, line))
    if (!line.empty() && line[0] != '>' && line[0] != ';') residues += line;
  return validate_sequence(residues);
}

int exit_for(ErrorCode code) {
  if (is_backend_error(code)) return kBackend;
  switch (code) {
    case ErrorCode::PlanParseFailure:
    case ErrorCode::ExecutorParseFailure:
    case ErrorCode::EpisodeAborted:
    case ErrorCode::AllSourcesFailed:
    case ErrorCode::CassetteMiss:
    case ErrorCode::SourceUnavailable:
    case ErrorCode::RateLimited:
    case ErrorCode::UnparseableJudgment:
    case ErrorCode::GenerationRejected:
      return kAborted;
    default:
      return kConfig;
  }
}

std::string one_line(std::string_view s) {
  std::string out;
  for (char c : s) out += (c == '\n' || c == '\r') ? ' ' : c;
  return out;
}

// --------------------------------------------------------------------------

struct AskArgs {
  std::string query;
  std::string sequence_file;
  std::string trace_out;
  std::string episode_id;
  bool offline = false;
};

int cmd_ask(const Common& common, const AskArgs& a) {
  Session session(common, a.offline);
  auto query = MultimodalQuery::make(a.query, read_sequence_file(a.sequence_file));
  auto trace = session.engine.controller->run_episode(query, a.episode_id);
  if (!a.trace_out.empty()) append_line(a.trace_out, trace_to_line(trace));
  session.save();

  std::cout << "episode " << trace.episode_id << "\n";
  for (const auto& r : trace.rounds) {
    std::cout << "round " << r.index << ": " << r.plan.nodes.size() << " plan nodes, " << r.results.items.size()
              << " results, decide=" << (r.decide ? "yes" : "no");
    if (r.next_query) std::cout << ", next_query=\"" << one_line(*r.next_query) << "\"";
    std::cout << ", tokens=" << r.usage.total() << "\n";
    for (const auto& w : r.results.warnings) std::cout << "  warning: " << w << "\n";
  }
  if (trace.aborted) {
    const auto& ab = *trace.abort;
    std::cerr << "episode aborted in round " << ab.round << ": " << ab.message << "\n";
    auto code = parse_error_code(ab.code);
    return code && is_backend_error(*code) ? kBackend : kAborted;
  }
  std::cout << "status: " << (trace.exhausted ? "exhausted round cap" : "answered") << " after "
            << trace.totals.rounds << " round(s), " << trace.totals.tokens << " tokens\n";
  std::cout << "final answer: " << trace.final_answer << "\n";
  return kOk;
}

struct PlanArgs {
  std::string query;
  std::string sequence_file;
};

int cmd_plan(const Common& common, const PlanArgs& a) {
  Session session(common, false);
  auto query = MultimodalQuery::make(a.query, read_sequence_file(a.sequence_file));
  Planner planner(*session.engine.gateway, session.config.loop.plan_retries);
  PlanLog log;
  SearchPlan plan;
  try {
    plan = planner.build_plan(query, &log);
  } catch (const Error& e) {
    session.save();
    if (e.verdict())
      for (const auto& v : e.verdict()->violations) std::cerr << "  " << v.code << ": " << v.message << "\n";
    throw;
  }
  session.save();
  std::cout << protocol::serialize_plan(plan) << "\n";
  return kOk;
}

struct RewardArgs {
  std::string traces;
  std::string gt;
  std::string out;
};

int cmd_reward(const Common& common, const RewardArgs& a) {
  Session session(common, false);
  for (const auto& p : {a.traces, a.gt})
    if (!std::filesystem::is_regular_file(p)) throw Error(ErrorCode::ConfigError, "file not found: " + p);
  auto rows = score_episode_file(a.traces, a.gt, session.config.reward, *session.engine.gateway, a.out);
  session.save();
  char buf[200];
  std::snprintf(buf, sizeof buf, "%-28s %8s %8s %8s %8s %10s\n", "episode_id", "r_ans", "r_kw", "r_tool", "r_fmt",
                "r_total");
  std::cout << buf;
  // adding 0.0 turns a rounding -0 into +0 for display
  double sum = 0;
  for (const auto& [id, b] : rows) {
    std::snprintf(buf, sizeof buf, "%-28s %8.4f %8.4f %8.4f %8.4f %10.6f\n", id.c_str(), b.r_ans + 0.0, b.r_kw + 0.0,
                  b.r_tool + 0.0, b.r_fmt + 0.0, std::abs(b.r_total) < 5e-7 ? 0.0 : b.r_total);
    std::cout << buf;
    sum += b.r_total;
  }
  if (rows.empty()) {
    std::cout << "episodes 0\n";
  } else {
    std::snprintf(buf, sizeof buf, "episodes %zu, mean r_total %.6f\n", rows.size(),
                  std::abs(sum) < 5e-7 ? 0.0 : sum / static_cast<double>(rows.size()));
    std::cout << buf;
  }
  return kOk;
}

struct BenchArgs {
  std::string dataset;
  std::optional<int> level;
  std::string report_out;
  std::string traces_out;
};

int cmd_bench(const Common& common, const BenchArgs& a) {
  if (!std::filesystem::is_regular_file(a.dataset)) throw Error(ErrorCode::ConfigError, "dataset not found: " + a.dataset);
  auto items = load_mcqs(a.dataset);
  if (a.level) {
    if (*a.level < 1 || *a.level > 3) throw Error(ErrorCode::ConfigError, "--level must be 1, 2 or 3");
    std::erase_if(items, [&](const McqItem& i) { return i.level != *a.level; });
  }
  Session session(common, false);
  BenchOptions opts;
  opts.workers = session.recorder ? 1 : session.config.bench_workers;
  opts.traces_out = a.traces_out;
  if (opts.traces_out.empty()) {
    std::filesystem::path p(a.report_out);
    opts.traces_out = p.parent_path() / (p.stem().string() + ".traces.jsonl");
  }
  auto report = run_benchmark(items, *session.engine.controller, opts);
  session.save();
  write_file(a.report_out, report.to_json().dump(2) + "\n");
  std::cout << report.to_table();
  return kOk;
}

struct BuildArgs {
  std::string accessions_file;
  std::string category;
  std::string task;
  std::string out;
  double tolerance = 0.1;
};

int cmd_build_data(const Common& common, const BuildArgs& a) {
  const auto category = parse_category(a.category);
  const auto task = parse_task(a.task);
  if (!std::filesystem::is_regular_file(a.accessions_file))
    throw Error(ErrorCode::ConfigError, "accessions file not found: " + a.accessions_file);
  std::vector<std::pair<std::string, std::string>> wanted;
  for (const auto& [line_no, line] : read_lines(a.accessions_file)) {
    std::istringstream in(line);
    std::string acc, species, word;
    in >> acc;
    while (in >> word) species += (species.empty() ? "" : " ") + word;
    if (species.empty())
      throw Error(ErrorCode::ConfigError,
                  a.accessions_file + ":" + std::to_string(line_no) + ": expected \"<accession> <species>\"");
    wanted.emplace_back(acc, species);
  }
  if (wanted.empty()) throw Error(ErrorCode::ConfigError, "accessions file is empty: " + a.accessions_file);

  Session session(common, false);
  std::unique_ptr<EntrySource> entries;
  if (!session.config.data.entries_dir.empty())
    entries = std::make_unique<ReplayEntrySource>(session.config.data.entries_dir);
  else
    entries = std::make_unique<LiveEntrySource>(session.config.retrieval.endpoints.uniprot_base,
                                                session.config.retrieval.endpoints.timeout_s);
  auto literature = make_sources(session.config.retrieval).at(SearchTool::Literature);
  SampleBuilder builder(*session.engine.gateway, *entries, *literature, session.config.data.pipeline);

  std::vector<TrainingSample> samples;
  int backend_failures = 0;
  for (const auto& [acc, species] : wanted) {
    try {
      samples.push_back(builder.build_sample(acc, species, category, task));
    } catch (const Error& e) {
      if (is_backend_error(e.code())) ++backend_failures;
      std::cerr << "skipped " << acc << ": " << e.what() << "\n";
    }
  }
  session.save();
  if (samples.empty()) {
    std::cerr << "no samples were built\n";
    return backend_failures == static_cast<int>(wanted.size()) ? kBackend : kAborted;
  }
  export_samples(samples, a.out);
  std::cout << "wrote " << samples.size() << " of " << wanted.size() << " samples to " << a.out << "\n";
  std::cout << distribution_report(samples, a.tolerance).to_table();
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"protrl: protein search-agent engine"};
  app.require_subcommand(1);
  Common common;

  AskArgs ask;
  auto* c_ask = app.add_subcommand("ask", "Run one multi-round episode");
  add_common(c_ask, common);
  c_ask->add_option("--query", ask.query, "Question text")->required();
  c_ask->add_option("--sequence-file", ask.sequence_file, "Protein sequence (raw or FASTA)");
  c_ask->add_option("--trace-out", ask.trace_out, "Append the episode trace (JSONL)");
  c_ask->add_option("--episode-id", ask.episode_id, "Episode id (default: digest of query and sequence)");
  c_ask->add_flag("--offline", ask.offline, "Replay cassettes and stub embeddings only");

  PlanArgs plan;
  auto* c_plan = app.add_subcommand("plan", "Print the validated round-1 plan");
  add_common(c_plan, common);
  c_plan->add_option("--query", plan.query, "Question text")->required();
  c_plan->add_option("--sequence-file", plan.sequence_file, "Protein sequence (raw or FASTA)");

  RewardArgs reward;
  auto* c_reward = app.add_subcommand("reward", "Score episode traces against ground truth");
  add_common(c_reward, common);
  c_reward->add_option("--traces", reward.traces, "Trace JSONL")->required();
  c_reward->add_option("--gt", reward.gt, "Ground-truth JSONL")->required();
  c_reward->add_option("--out", reward.out, "Write reward-annotated traces here");

  BenchArgs bench;
  auto* c_bench = app.add_subcommand("bench", "Run a multiple-choice benchmark");
  add_common(c_bench, common);
  c_bench->add_option("--dataset", bench.dataset, "MCQ JSONL")->required();
  c_bench->add_option("--level", bench.level, "Only items of this level (1-3)");
  c_bench->add_option("--report-out", bench.report_out, "Report JSON path")->required();
  c_bench->add_option("--traces-out", bench.traces_out, "Trace JSONL (default: <report>.traces.jsonl)");

  BuildArgs build;
  auto* c_build = app.add_subcommand("build-data", "Build training samples from reviewed entries");
  add_common(c_build, common);
  c_build->add_option("--accessions-file", build.accessions_file, "Lines of \"<accession> <species>\"")->required();
  c_build->add_option("--category", build.category, "Protein category")->required();
  c_build->add_option("--task", build.task, "Reasoning task")->required();
  c_build->add_option("--out", build.out, "Sample JSONL")->required();
  c_build->add_option("--tolerance", build.tolerance, "Task-share deviation that gets flagged");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }

  try {
    if (*c_ask) return cmd_ask(common, ask);
    if (*c_plan) return cmd_plan(common, plan);
    if (*c_reward) return cmd_reward(common, reward);
    if (*c_bench) return cmd_bench(common, bench);
    if (*c_build) return cmd_build_data(common, build);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfig;
  }
  return kConfig;
}
