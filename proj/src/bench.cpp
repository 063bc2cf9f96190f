#include "protrl/bench.hpp"

#include <cctype>
#include <cstdio>
#include <sstream>

#include "protrl/parallel.hpp"
#include "protrl/serialization.hpp"
#include "protrl/text.hpp"

namespace protrl {

McqItem mcq_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::SchemaViolation, "item is not a JSON object");
  if (j.value("schema", std::string(kMcqSchema)) != kMcqSchema)
    throw Error(ErrorCode::SchemaViolation, "expected schema \"" + std::string(kMcqSchema) + "\"");
  McqItem item;
  try {
    item.id = j.at("id").get<std::string>();
    item.level = j.at("level").get<int>();
    item.question = j.at("question").get<std::string>();
    const auto& opts = j.at("options");
    if (!opts.is_object()) throw Error(ErrorCode::SchemaViolation, "options must be an object");
    for (const auto& [label, value] : opts.items()) {
      if (label.size() != 1 || label[0] < 'A' || label[0] > 'D')
        throw Error(ErrorCode::SchemaViolation, "option label \"" + label + "\" is not one of A-D");
      item.options[label[0]] = value.get<std::string>();
    }
    const auto key = j.at("answer_key").get<std::string>();
    if (key.size() != 1) throw Error(ErrorCode::SchemaViolation, "answer_key \"" + key + "\" is not a label");
    item.answer_key = key[0];
    if (j.contains("sequence") && !j["sequence"].is_null())
      item.sequence = validate_sequence(j["sequence"].get<std::string>());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, e.what());
  }
  if (item.id.empty()) throw Error(ErrorCode::SchemaViolation, "id is empty");
  if (item.level < 1 || item.level > 3)
    throw Error(ErrorCode::SchemaViolation, "level " + std::to_string(item.level) + " is not 1, 2 or 3");
  if (text::trim(item.question).empty()) throw Error(ErrorCode::SchemaViolation, "question is empty");
  if (item.options.size() != 4)
    throw Error(ErrorCode::SchemaViolation, "expected 4 options, got " + std::to_string(item.options.size()));
  if (!item.options.count(item.answer_key))
    throw Error(ErrorCode::SchemaViolation, std::string("answer_key \"") + item.answer_key + "\" is not an option");
  return item;
}

json mcq_to_json(const McqItem& item) {
  json opts = json::object();
  for (const auto& [label, value] : item.options) opts[std::string(1, label)] = value;
  json j{{"schema", kMcqSchema}, {"id", item.id},     {"level", item.level},
         {"question", item.question}, {"options", opts}, {"answer_key", std::string(1, item.answer_key)}};
  if (item.sequence) j["sequence"] = item.sequence->residues();
  return j;
}

std::vector<McqItem> load_mcqs(const std::filesystem::path& path) {
  std::vector<McqItem> items;
  for (const auto& [line_no, line] : read_lines(path)) {
    const auto where = path.string() + ":" + std::to_string(line_no) + ": ";
    json j = json::parse(line, nullptr, false);
    try {
      if (j.is_discarded()) throw Error(ErrorCode::SchemaViolation, "not valid JSON");
      items.push_back(mcq_from_json(j));
    } catch (const Error& e) {
      throw Error(ErrorCode::SchemaViolation, where + e.what()).with_position(static_cast<std::int64_t>(line_no));
    }
  }
  return items;
}

std::string mcq_query_text(const McqItem& item) {
  std::string q = item.question;
  q += "\nOptions:";
  for (const auto& [label, value] : item.options) q += std::string("\n") + label + ". " + value;
  return q;
}

std::optional<char> extract_label(std::string_view s) {
  auto word = [](unsigned char c) { return std::isalnum(c) || c == '_'; };
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto c = static_cast<char>(std::toupper(static_cast<unsigned char>(s[i])));
    if (c < 'A' || c > 'D') continue;
    if (i > 0 && word(static_cast<unsigned char>(s[i - 1]))) continue;
    if (i + 1 < s.size() && word(static_cast<unsigned char>(s[i + 1]))) continue;
    return c;
  }
  return std::nullopt;
}

bool grade_answer(std::string_view final_answer, const McqItem& item) {
  auto label = extract_label(final_answer);
  return label && *label == item.answer_key;
}

namespace {

LevelRow make_row(int level, const std::vector<const ItemOutcome*>& xs) {
  LevelRow r;
  r.level = level;
  r.n = xs.size();
  if (r.n == 0) return r;
  double tokens = 0, time = 0;
  for (const auto* o : xs) {
    r.correct += o->correct ? 1 : 0;
    tokens += static_cast<double>(o->tokens);
    time += o->time_s;
  }
  const auto n = static_cast<double>(r.n);
  r.accuracy_percent = 100.0 * static_cast<double>(r.correct) / n;
  r.mean_tokens = tokens / n;
  r.mean_time_s = time / n;
  return r;
}

json row_json(const LevelRow& r) {
  return json{{"level", r.level == 0 ? json("overall") : json(r.level)},
              {"n", r.n},
              {"correct", r.correct},
              {"accuracy_percent", r.accuracy_percent},
              {"mean_tokens", r.mean_tokens},
              {"mean_time_s", r.mean_time_s}};
}

}  // namespace

BenchReport aggregate_outcomes(std::vector<ItemOutcome> outcomes) {
  BenchReport report;
  std::map<int, std::vector<const ItemOutcome*>> by_level;
  std::vector<const ItemOutcome*> all;
  report.items = std::move(outcomes);
  for (const auto& o : report.items) {
    by_level[o.level].push_back(&o);
    all.push_back(&o);
  }
  for (const auto& [level, xs] : by_level) report.levels.push_back(make_row(level, xs));
  report.overall = make_row(0, all);
  return report;
}

json BenchReport::to_json() const {
  json rows = json::array();
  for (const auto& r : levels) rows.push_back(row_json(r));
  json its = json::array();
  for (const auto& o : items) {
    json j{{"id", o.id},         {"level", o.level},   {"episode_id", o.episode_id}, {"correct", o.correct},
           {"tokens", o.tokens}, {"time_s", o.time_s}, {"chosen", nullptr},          {"error", nullptr}};
    if (o.chosen) j["chosen"] = std::string(1, *o.chosen);
    if (o.error) j["error"] = *o.error;
    its.push_back(std::move(j));
  }
  return json{{"schema", kBenchReportSchema}, {"levels", rows}, {"overall", row_json(overall)}, {"items", its}};
}

std::string BenchReport::to_table() const {
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-8s %5s %8s %10s %12s %10s\n", "level", "n", "correct", "acc(%)", "mean_tokens",
                "mean_s");
  os << buf;
  auto line = [&](const LevelRow& r) {
    const auto name = r.level == 0 ? std::string("overall") : std::to_string(r.level);
    std::snprintf(buf, sizeof buf, "%-8s %5zu %8zu %10.1f %12.1f %10.3f\n", name.c_str(), r.n, r.correct,
                  r.accuracy_percent, r.mean_tokens, r.mean_time_s);
    os << buf;
  };
  for (const auto& r : levels) line(r);
  line(overall);
  return os.str();
}

BenchReport run_benchmark(const std::vector<McqItem>& items, const RoundController& controller,
                          const BenchOptions& options) {
  std::vector<ItemOutcome> outcomes(items.size());
  std::vector<std::optional<EpisodeTrace>> traces(items.size());
  auto errors = parallel_for(items.size(), options.workers, [&](std::size_t i) {
    const auto& item = items[i];
    auto& o = outcomes[i];
    o.id = item.id;
    o.level = item.level;
    o.episode_id = "mcq-" + item.id;
    auto query = MultimodalQuery::make(mcq_query_text(item), item.sequence);
    auto trace = controller.run_episode(query, o.episode_id);
    o.tokens = trace.totals.tokens;
    o.time_s = static_cast<double>(trace.totals.wall_ms) / 1000.0;
    if (trace.aborted) {
      o.error = trace.abort ? trace.abort->code + ": " + trace.abort->message : "aborted";
    } else {
      o.chosen = extract_label(trace.final_answer);
      o.correct = grade_answer(trace.final_answer, item);
    }
    traces[i] = std::move(trace);
  });
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i]) continue;
    auto& o = outcomes[i];
    o.correct = false;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const std::exception& e) {
      o.error = e.what();
    } catch (...) {
      o.error = "unknown failure";
    }
  }
  if (!options.traces_out.empty()) {
    std::string lines;
    for (const auto& t : traces)
      if (t) lines += trace_to_line(*t) + "\n";
    write_file(options.traces_out, lines);
  }
  return aggregate_outcomes(std::move(outcomes));
}

}  // namespace protrl
