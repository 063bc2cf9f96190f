#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include "support/test_support.hpp"

using nlohmann::json;
using protrl::read_file;
using protrl::read_lines;
using protrl::write_file;
using protrl::testing::fixture;
using protrl::testing::fixtures_dir;
using protrl::testing::run_cli;
using protrl::testing::TempDir;

namespace {

const std::string kAskQuery = "What is the functional consequence of the R175H substitution in this protein?";

// Fixture config with absolute paths, minus the given retriever keys.
std::filesystem::path config_copy(const TempDir& dir, const std::vector<std::string>& drop_retriever = {}) {
  auto j = json::parse(read_file(fixture("config.json")));
  j["backend"]["manifest"] = fixture("manifest.json").string();
  j["retriever"]["cassette_dir"] = fixture("cassettes").string();
  j["data"]["entries_dir"] = fixture("entries").string();
  for (const auto& k : drop_retriever) j["retriever"].erase(k);
  write_file(dir / "config.json", j.dump());
  return dir / "config.json";
}

}  // namespace

TEST(CliAsk, GoldenOutputAndTrace) {
  TempDir dir;
  auto r = run_cli({"ask", "--config", "config.json", "--query", kAskQuery, "--sequence-file", "p53.fasta",
                    "--trace-out", (dir / "t.jsonl").string(), "--offline"},
                   fixtures_dir());
  EXPECT_EQ(r.exit_code, 0) << r.err;
  EXPECT_EQ(r.out, read_file(fixture("golden/ask_stdout.txt")));
  EXPECT_EQ(read_file(dir / "t.jsonl"), read_file(fixture("golden/ask_trace.jsonl")));
}

TEST(CliAsk, TraceOutAppends) {
  TempDir dir;
  auto cfg = config_copy(dir);
  for (int i = 0; i < 2; ++i) {
    auto r = run_cli({"ask", "--config", cfg.string(), "--query", kAskQuery, "--sequence-file",
                      fixture("p53.fasta").string(), "--trace-out", (dir / "t.jsonl").string()});
    ASSERT_EQ(r.exit_code, 0) << r.err;
  }
  EXPECT_EQ(read_lines(dir / "t.jsonl").size(), 2u);
}

TEST(CliAsk, FlagOverridesConfig) {
  TempDir dir;
  auto r = run_cli({"ask", "--config", config_copy(dir).string(), "--query", kAskQuery, "--sequence-file",
                    fixture("p53.fasta").string(), "--max-rounds", "1"});
  EXPECT_EQ(r.exit_code, 0) << r.err;
  EXPECT_NE(r.out.find("status: exhausted round cap after 1 round(s)"), std::string::npos) << r.out;
}

TEST(CliAsk, MissingConfigNamesPath) {
  auto r = run_cli({"ask", "--config", "/nowhere/cfg.json", "--query", "q"});
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_NE(r.err.find("/nowhere/cfg.json"), std::string::npos) << r.err;
}

TEST(CliAsk, OfflineWithoutCassetteDir) {
  TempDir dir;
  auto r = run_cli({"ask", "--config", config_copy(dir, {"cassette_dir"}).string(), "--query", "q", "--offline"});
  EXPECT_EQ(r.exit_code, 1) << r.err;
  EXPECT_NE(r.err.find("cassette"), std::string::npos) << r.err;
}

TEST(CliAsk, UsageErrorsAndBackendMiss) {
  TempDir dir;
  auto cfg = config_copy(dir).string();
  EXPECT_EQ(run_cli({"ask", "--config", cfg}).exit_code, 1);
  EXPECT_EQ(run_cli({"ask", "--config", cfg, "--query", "q", "--k", "0"}).exit_code, 1);
  EXPECT_EQ(run_cli({"frobnicate"}).exit_code, 1);
  // no manifest entry for this prompt: a backend failure aborts the episode
  auto r = run_cli({"ask", "--config", cfg, "--query", "an unscripted question"});
  EXPECT_EQ(r.exit_code, 2) << r.out << r.err;
}

TEST(CliPlan, GoldenDag) {
  auto r = run_cli({"plan", "--config", "config.json", "--query", kAskQuery, "--sequence-file", "p53.fasta"},
                   fixtures_dir());
  EXPECT_EQ(r.exit_code, 0) << r.err;
  EXPECT_EQ(r.out, read_file(fixture("golden/plan_stdout.txt")));
}

TEST(CliPlan, InvalidTwiceExitsThree) {
  auto r = run_cli({"plan", "--config", "config.json", "--manifest", "manifest_bad_plan.json", "--query",
                    "Which kinases phosphorylate p53 at serine 15?"},
                   fixtures_dir());
  EXPECT_EQ(r.exit_code, 3) << r.err;
  EXPECT_NE(r.err.find("CyclicPlan"), std::string::npos) << r.err;
}

TEST(CliPlan, NoQueryIsUsageError) {
  auto r = run_cli({"plan", "--config", "config.json"}, fixtures_dir());
  EXPECT_EQ(r.exit_code, 1);
}

TEST(CliReward, OracleSuite) {
  TempDir dir;
  auto reward = fixture("reward");
  auto r = run_cli({"reward", "--config", fixture("config.json").string(), "--scenario",
                    (reward / "judges.json").string(), "--traces", (reward / "traces.jsonl").string(), "--gt",
                    (reward / "gt.jsonl").string(), "--out", (dir / "scored.jsonl").string()});
  ASSERT_EQ(r.exit_code, 0) << r.err;
  auto expected = json::parse(read_file(reward / "expected.json"));
  auto lines = read_lines(dir / "scored.jsonl");
  ASSERT_EQ(lines.size(), 20u);
  for (const auto& [n, line] : lines) {
    auto j = json::parse(line);
    const auto id = j["episode_id"].get<std::string>();
    ASSERT_TRUE(expected.contains(id)) << id;
    EXPECT_NEAR(j["reward"]["r_total"].get<double>(), expected[id]["r_total"].get<double>(), 1e-9) << id;
  }
  EXPECT_EQ(r.out.find("-0.000000"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("episodes 20"), std::string::npos);
}

TEST(CliReward, MissingGroundTruthAndEmptyTraces) {
  TempDir dir;
  auto reward = fixture("reward");
  auto gt_lines = read_lines(reward / "gt.jsonl");
  std::string partial;
  for (std::size_t i = 1; i < gt_lines.size(); ++i) partial += gt_lines[i].second + "\n";
  write_file(dir / "gt.jsonl", partial);
  const auto dropped = json::parse(gt_lines[0].second)["episode_id"].get<std::string>();
  auto r = run_cli({"reward", "--config", fixture("config.json").string(), "--scenario",
                    (reward / "judges.json").string(), "--traces", (reward / "traces.jsonl").string(), "--gt",
                    (dir / "gt.jsonl").string()});
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_NE(r.err.find(dropped), std::string::npos) << r.err;

  write_file(dir / "empty.jsonl", "");
  auto e = run_cli({"reward", "--config", fixture("config.json").string(), "--traces", (dir / "empty.jsonl").string(),
                    "--gt", (reward / "gt.jsonl").string()});
  EXPECT_EQ(e.exit_code, 0) << e.err;
  EXPECT_NE(e.out.find("episodes 0"), std::string::npos);
}

TEST(CliBench, GoldenReportAndTable) {
  TempDir dir;
  auto r = run_cli({"bench", "--config", "config.json", "--dataset", "mcq_level1.jsonl", "--report-out",
                    (dir / "report.json").string()},
                   fixtures_dir());
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_EQ(r.out, read_file(fixture("golden/bench_table.txt")));
  EXPECT_EQ(json::parse(read_file(dir / "report.json")), json::parse(read_file(fixture("golden/bench_report.json"))));
  // default traces path sits next to the report
  EXPECT_EQ(read_file(dir / "report.traces.jsonl"), read_file(fixture("golden/bench_traces.jsonl")));
}

TEST(CliBench, LevelFilter) {
  TempDir dir;
  auto r = run_cli({"bench", "--config", "config.json", "--dataset", "mcq_level1.jsonl", "--level", "2",
                    "--report-out", (dir / "report.json").string()},
                   fixtures_dir());
  ASSERT_EQ(r.exit_code, 0) << r.err;
  auto j = json::parse(read_file(dir / "report.json"));
  EXPECT_TRUE(j["levels"].empty());
  EXPECT_TRUE(j["items"].empty());
}

TEST(CliBench, MalformedLineNamed) {
  TempDir dir;
  auto lines = read_lines(fixture("mcq_level1.jsonl"));
  write_file(dir / "d.jsonl", lines[0].second + "\n" + lines[1].second + "\n{\"schema\":\"protrlsearch.mcq.v1\"\n");
  auto r = run_cli({"bench", "--config", fixture("config.json").string(), "--dataset", (dir / "d.jsonl").string(),
                    "--report-out", (dir / "r.json").string()});
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_NE(r.err.find(":3:"), std::string::npos) << r.err;
}

TEST(CliBuildData, ReviewedAccessionsSkipUnreviewed) {
  TempDir dir;
  auto r = run_cli({"build-data", "--config", "config.json", "--accessions-file", "accessions.txt", "--category",
                    "transcription_factor", "--task", "variant_to_phenotype", "--out", (dir / "s.jsonl").string()},
                   fixtures_dir());
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_EQ(read_lines(dir / "s.jsonl").size(), 2u);
  EXPECT_EQ(read_file(dir / "s.jsonl"), read_file(fixture("golden/samples.jsonl")));
  EXPECT_NE(r.out.find("wrote 2 of 3 samples"), std::string::npos) << r.out;
  EXPECT_NE(r.err.find("NotReviewed"), std::string::npos) << r.err;
}

TEST(CliBuildData, AllUnreviewedAndEmptyInput) {
  TempDir dir;
  auto r = run_cli({"build-data", "--config", "config.json", "--accessions-file", "accessions_unreviewed.txt",
                    "--category", "transcription_factor", "--task", "variant_to_phenotype", "--out",
                    (dir / "s.jsonl").string()},
                   fixtures_dir());
  EXPECT_EQ(r.exit_code, 3) << r.err;
  EXPECT_NE(r.err.find("NotReviewed"), std::string::npos) << r.err;

  write_file(dir / "empty.txt", "\n");
  auto e = run_cli({"build-data", "--config", fixture("config.json").string(), "--accessions-file",
                    (dir / "empty.txt").string(), "--category", "transcription_factor", "--task",
                    "variant_to_phenotype", "--out", (dir / "s2.jsonl").string()});
  EXPECT_EQ(e.exit_code, 1) << e.err;
}
