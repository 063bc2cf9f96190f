#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include "protrl/reward.hpp"
#include "protrl/serialization.hpp"
#include "support/test_support.hpp"

using namespace protrl;
using nlohmann::json;
using protrl::testing::executor_reply;
using protrl::testing::FnBackend;
using protrl::testing::TempDir;

namespace {

SearchPlan plan_of(std::vector<std::pair<std::string, SearchTool>> kws) {
  SearchPlan p;
  int i = 0;
  for (auto& [k, t] : kws) p.nodes.push_back({"n" + std::to_string(++i), k, t});
  return p;
}

std::shared_ptr<FnBackend> judge(std::string reply) {
  return std::make_shared<FnBackend>([reply](const GenerationRequest&) { return reply; });
}

const std::string kPlanText = R"(<DAG>{"nodes":[{"id":"n1","keyword":"TP53","tool":"UniProt"}],"edges":[]}</DAG>)";

EpisodeTrace good_trace(const std::string& id, const std::string& answer) {
  EpisodeTrace t;
  t.episode_id = id;
  t.query = "q";
  RoundRecord r;
  r.plan = plan_of({{"TP53", SearchTool::UniProt}});
  r.answer = answer;
  r.decide = true;
  r.usage = {3, 4};
  t.rounds = {r};
  t.raw_outputs = {{1, Stage::Planner, kPlanText}, {1, Stage::Executor, executor_reply(answer, true)}};
  t.finalize();
  return t;
}

void write_gt(const std::filesystem::path& path, const std::vector<std::string>& ids) {
  std::string body;
  for (const auto& id : ids)
    body += json{{"episode_id", id}, {"answer", "ans"}, {"keywords", {"tp53"}}, {"tool_map", {{"tp53", "UniProt"}}}}.dump() + "\n";
  write_file(path, body);
}

}  // namespace

TEST(AnswerReward, ThresholdInclusive) {
  RewardConfig c;
  EXPECT_EQ(answer_reward_from_similarity(0.9, 0.7), 1.0);
  EXPECT_EQ(answer_reward_from_similarity(0.7, 0.7), 1.0);
  EXPECT_EQ(answer_reward_from_similarity(0.69, 0.7), -1.0);
  EXPECT_EQ(answer_reward(Gateway(judge("0.9")), "p", "gt", c), 1.0);
  EXPECT_EQ(answer_reward(Gateway(judge("0.7")), "p", "gt", c), 1.0);
  EXPECT_EQ(answer_reward(Gateway(judge("0.69")), "p", "gt", c), -1.0);
  EXPECT_EQ(answer_reward(Gateway(judge("1.0")), "", "gt", c), -1.0);
  EXPECT_THROW(answer_reward(Gateway(judge("no idea")), "p", "gt", c), Error);
}

TEST(KeywordsReward, Examples) {
  RewardConfig c;
  auto gt = GroundTruth::make("a", {"a", "b", "c", "d"}, {});
  auto full = plan_of({{"A", SearchTool::Web}, {"b", SearchTool::Web}, {"c", SearchTool::Web}, {"d", SearchTool::Web}});
  EXPECT_EQ(keywords_reward(&full, gt, c), 1.0);
  auto none = plan_of({{"x", SearchTool::Web}, {"y", SearchTool::Web}});
  EXPECT_EQ(keywords_reward(&none, gt, c), -0.25);
  auto three = plan_of({{"a", SearchTool::Web}, {"b", SearchTool::Web}, {"c", SearchTool::Web}, {"z", SearchTool::Web}});
  EXPECT_DOUBLE_EQ(keywords_reward(&three, gt, c), 0.6875);
  EXPECT_EQ(keywords_reward(nullptr, gt, c), -1.0);
}

TEST(KeywordsReward, CaseAndWhitespaceInvariant) {
  RewardConfig c;
  auto gt = GroundTruth::make("a", {"tp53 dna-binding", "mdm2"}, {});
  auto p1 = plan_of({{"TP53 DNA-binding", SearchTool::Web}, {"x", SearchTool::Web}});
  auto p2 = plan_of({{"  tp53   dna-binding ", SearchTool::Web}, {"X", SearchTool::Web}});
  EXPECT_EQ(keywords_reward(&p1, gt, c), keywords_reward(&p2, gt, c));
}

TEST(ToolReward, Examples) {
  auto gt = GroundTruth::make("a", {"a", "b", "c", "d"},
                              {{"a", SearchTool::UniProt}, {"b", SearchTool::Web}, {"c", SearchTool::Literature}, {"d", SearchTool::Web}});
  auto all = plan_of({{"a", SearchTool::UniProt}, {"b", SearchTool::Web}, {"c", SearchTool::Literature}, {"d", SearchTool::Web}});
  EXPECT_EQ(tool_reward(&all, gt), 1.0);
  auto half = plan_of({{"a", SearchTool::UniProt}, {"B", SearchTool::Web}});
  EXPECT_EQ(tool_reward(&half, gt), 0.5);
  EXPECT_EQ(tool_reward(nullptr, gt), -1.0);
  // a keyword searched with two tools does not count
  auto split = plan_of({{"a", SearchTool::UniProt}, {"a", SearchTool::Web}});
  EXPECT_EQ(tool_reward(&split, gt), 0.0);
}

TEST(FormatReward, Examples) {
  std::vector<RawOutput> ok = {{1, Stage::Planner, kPlanText}, {1, Stage::Executor, executor_reply("a", true)}};
  EXPECT_EQ(format_reward(ok), 1.0);
  auto bad = ok;
  bad[1].text = "<reason>r</reason><decide>yes</decide>";
  EXPECT_EQ(format_reward(bad), -1.0);
  EXPECT_EQ(format_reward({}), -1.0);
}

TEST(CombineRewards, AnchorsAndLinearity) {
  RewardWeights w;
  EXPECT_DOUBLE_EQ(combine_rewards(1, 1, 1, 1, w).r_total, 1.0);
  EXPECT_NEAR(combine_rewards(1, -1, -1, -1, w).r_total, 0.0, 1e-12);
  RewardWeights w2{1.0, 0.4, 0.4, 0.2};
  for (double a : {-1.0, 1.0})
    for (double k : {-1.0, -0.25, 0.6875})
      EXPECT_DOUBLE_EQ(combine_rewards(a, k, 0.5, -1, w2).r_total, 2 * combine_rewards(a, k, 0.5, -1, w).r_total);
}

TEST(TotalReward, AbortedWithoutPlanPenalized) {
  EpisodeTrace t;
  t.episode_id = "e";
  t.query = "q";
  t.aborted = true;
  t.abort = AbortInfo{1, "PlanParseFailure", "cyclic"};
  t.raw_outputs = {{1, Stage::Planner, "<DAG>{}</DAG>"}};
  t.finalize();
  auto gt = GroundTruth::make("ans", {"tp53"}, {{"tp53", SearchTool::UniProt}});
  auto b = total_reward(t, t.raw_outputs, gt, {}, Gateway(judge("1.0")));
  EXPECT_EQ(b.r_ans, -1.0);
  EXPECT_EQ(b.r_kw, -1.0);
  EXPECT_EQ(b.r_tool, -1.0);
  EXPECT_EQ(b.r_fmt, -1.0);
  EXPECT_DOUBLE_EQ(b.r_total, -1.0);
}

TEST(TotalReward, RecoversRound1PlanFromRawOutput) {
  EpisodeTrace t;
  t.episode_id = "e";
  t.aborted = true;
  t.abort = AbortInfo{1, "AllSourcesFailed", "down"};
  t.raw_outputs = {{1, Stage::Planner, kPlanText}};
  auto p = round1_plan(t);
  ASSERT_TRUE(p.has_value());
  EXPECT_EQ(p->nodes[0].keyword, "TP53");
}

TEST(ScoreEpisodeFile, InputOrderAndAnnotation) {
  TempDir dir;
  std::string traces;
  for (auto id : {"c", "a", "b"}) traces += trace_to_line(good_trace(id, "ans")) + "\n";
  write_file(dir / "t.jsonl", traces);
  write_gt(dir / "gt.jsonl", {"a", "b", "c"});
  Gateway gw(judge("0.8"));
  auto out = score_episode_file(dir / "t.jsonl", dir / "gt.jsonl", {}, gw, dir / "out.jsonl");
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[0].first, "c");
  EXPECT_EQ(out[1].first, "a");
  EXPECT_EQ(out[2].first, "b");
  EXPECT_DOUBLE_EQ(out[0].second.r_total, 1.0);
  auto lines = read_lines(dir / "out.jsonl");
  ASSERT_EQ(lines.size(), 3u);
  auto first = json::parse(lines[0].second);
  EXPECT_EQ(first["episode_id"], "c");
  EXPECT_DOUBLE_EQ(first["reward"]["r_total"].get<double>(), 1.0);

  // its own output is already annotated
  try {
    score_episode_file(dir / "out.jsonl", dir / "gt.jsonl", {}, gw);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SchemaMismatch);
  }
}

TEST(ScoreEpisodeFile, MissingGroundTruthNamed) {
  TempDir dir;
  write_file(dir / "t.jsonl", trace_to_line(good_trace("a", "x")) + "\n" + trace_to_line(good_trace("lost-1", "x")) + "\n");
  write_gt(dir / "gt.jsonl", {"a"});
  try {
    score_episode_file(dir / "t.jsonl", dir / "gt.jsonl", {}, Gateway(judge("1")));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingGroundTruth);
    EXPECT_NE(std::string(e.what()).find("lost-1"), std::string::npos);
  }
}

TEST(ScoreEpisodeFile, WrongSchemaRejected) {
  TempDir dir;
  auto j = json::parse(trace_to_line(good_trace("a", "x")));
  j["schema"] = "something.else";
  write_file(dir / "t.jsonl", j.dump() + "\n");
  write_gt(dir / "gt.jsonl", {"a"});
  try {
    score_episode_file(dir / "t.jsonl", dir / "gt.jsonl", {}, Gateway(judge("1")));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SchemaMismatch);
  }
}

TEST(RewardConfig, Bounds) {
  RewardConfig c;
  EXPECT_NO_THROW(c.validate());
  c.tau = 1.0;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.kw_penalty = -1;
  EXPECT_THROW(c.validate(), Error);
}
