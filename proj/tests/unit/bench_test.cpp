#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include "protrl/bench.hpp"
#include "protrl/config.hpp"
#include "support/test_support.hpp"

using namespace protrl;
using nlohmann::json;
using protrl::testing::TempDir;

namespace {

std::filesystem::path fx(const std::string& rel) { return protrl::testing::fixture(rel); }

json item_json(const std::string& id, int level = 1) {
  return {{"schema", kMcqSchema},
          {"id", id},
          {"level", level},
          {"question", "Which domain binds DNA?"},
          {"options", {{"A", "TAD"}, {"B", "DBD"}, {"C", "OD"}, {"D", "CTD"}}},
          {"answer_key", "B"}};
}

McqItem item(char key = 'B') {
  auto j = item_json("x");
  j["answer_key"] = std::string(1, key);
  return mcq_from_json(j);
}

void expect_violation_at_line(const std::string& body, std::int64_t line) {
  TempDir dir;
  write_file(dir / "d.jsonl", body);
  try {
    load_mcqs(dir / "d.jsonl");
    FAIL() << body;
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SchemaViolation);
    EXPECT_EQ(e.position(), line);
    EXPECT_NE(std::string(e.what()).find(":" + std::to_string(line) + ":"), std::string::npos) << e.what();
  }
}

}  // namespace

TEST(LoadMcqs, ValidLines) {
  TempDir dir;
  write_file(dir / "d.jsonl", item_json("a").dump() + "\n\n" + item_json("b", 2).dump() + "\n" + item_json("c", 3).dump() + "\n");
  auto items = load_mcqs(dir / "d.jsonl");
  ASSERT_EQ(items.size(), 3u);
  EXPECT_EQ(items[1].level, 2);
  EXPECT_EQ(items[2].id, "c");
  EXPECT_EQ(items[0].answer_key, 'B');
  EXPECT_EQ(mcq_from_json(mcq_to_json(items[0])).options, items[0].options);
}

TEST(LoadMcqs, ViolationsNameTheLine) {
  auto three = item_json("b");
  three["options"].erase("D");
  expect_violation_at_line(item_json("a").dump() + "\n" + three.dump() + "\n", 2);
  auto key_e = item_json("b");
  key_e["answer_key"] = "E";
  expect_violation_at_line(key_e.dump() + "\n", 1);
  expect_violation_at_line(item_json("a").dump() + "\n\n{broken\n", 3);
  auto level4 = item_json("a", 4);
  expect_violation_at_line(level4.dump() + "\n", 1);
  auto bad_seq = item_json("a");
  bad_seq["sequence"] = "MKT1";
  expect_violation_at_line(bad_seq.dump() + "\n", 1);
}

TEST(LoadMcqs, MissingFile) {
  EXPECT_THROW(load_mcqs("/nonexistent/mcq.jsonl"), Error);
}

TEST(Grading, Examples) {
  auto it = item('B');
  EXPECT_TRUE(grade_answer("The answer is B.", it));
  EXPECT_TRUE(grade_answer("b) because the kinase domain is intact", it));
  EXPECT_FALSE(grade_answer("inconclusive", it));
  EXPECT_FALSE(grade_answer("A, not B", it));
  EXPECT_EQ(extract_label("Option (c) fits"), 'C');
  EXPECT_FALSE(extract_label("BRCA1 and ABCD").has_value());
  EXPECT_FALSE(extract_label("").has_value());
}

TEST(McqQueryText, QuestionThenOptions) {
  auto it = item();
  auto q = mcq_query_text(it);
  EXPECT_EQ(q.rfind(it.question, 0), 0u);
  EXPECT_NE(q.find("A. TAD"), std::string::npos);
  EXPECT_LT(q.find("A. TAD"), q.find("D. CTD"));
}

TEST(Aggregate, ArithmeticAndLevelOmission) {
  std::vector<ItemOutcome> out;
  for (int i = 0; i < 10; ++i) {
    ItemOutcome o;
    o.id = "m" + std::to_string(i);
    o.level = i < 8 ? 1 : 2;
    o.correct = i < 7;
    o.tokens = 100 + i;
    o.time_s = 0.5;
    out.push_back(o);
  }
  auto r = aggregate_outcomes(out);
  ASSERT_EQ(r.levels.size(), 2u);
  EXPECT_EQ(r.levels[0].level, 1);
  EXPECT_EQ(r.levels[0].n, 8u);
  EXPECT_DOUBLE_EQ(r.levels[0].accuracy_percent, 100.0 * 7 / 8);
  EXPECT_DOUBLE_EQ(r.levels[0].mean_tokens, (100 + 101 + 102 + 103 + 104 + 105 + 106 + 107) / 8.0);
  EXPECT_EQ(r.levels[1].level, 2);
  EXPECT_EQ(r.overall.n, 10u);
  EXPECT_DOUBLE_EQ(r.overall.accuracy_percent, 70.0);
  auto j = r.to_json();
  EXPECT_EQ(j["schema"], kBenchReportSchema);
  for (const auto& row : j["levels"]) EXPECT_NE(row["level"], 3);
  EXPECT_EQ(r.to_table().find("level 3"), std::string::npos);
}

TEST(RunBenchmark, ScriptedTenItemsMatchGolden) {
  TempDir dir;
  auto config = load_config(fx("config.json"));
  auto engine = build_engine(config, std::make_shared<ScenarioBackend>(json::parse(read_file(fx("scenario_bench.json")))));
  auto items = load_mcqs(fx("mcq_level1.jsonl"));
  ASSERT_EQ(items.size(), 10u);
  auto report = run_benchmark(items, *engine.controller, {1, dir / "traces.jsonl"});
  EXPECT_DOUBLE_EQ(report.overall.accuracy_percent, 70.0);
  ASSERT_EQ(report.levels.size(), 1u);
  EXPECT_EQ(report.to_json(), json::parse(read_file(fx("golden/bench_report.json"))));
  EXPECT_EQ(read_file(dir / "traces.jsonl"), read_file(fx("golden/bench_traces.jsonl")));
  // the malformed item is recorded, not fatal
  bool saw_error = false;
  for (const auto& o : report.items) saw_error = saw_error || o.error.has_value();
  EXPECT_TRUE(saw_error);
}
