#include <gtest/gtest.h>

#include "protrl/controller.hpp"
#include "protrl/protocol.hpp"
#include "protrl/serialization.hpp"
#include "support/test_support.hpp"

using namespace protrl;
using protrl::testing::executor_reply;
using protrl::testing::FnBackend;

namespace {

const char* kPlan = R"(<DAG>{"nodes":[{"id":"n1","keyword":"TP53","tool":"UniProt"}],"edges":[]}</DAG>)";

// Same two documents for any keyword of its tool.
class FixedSource : public SourceClient {
 public:
  explicit FixedSource(SearchTool tool) : tool_(tool) {}
  SearchTool tool() const override { return tool_; }
  std::vector<SearchResult> search(std::string_view keyword, std::size_t) override {
    if (keyword == "broken") throw Error(ErrorCode::SourceUnavailable, "broken");
    SearchResult a;
    a.source = tool_;
    a.doc_id = "D1";
    a.title = "p53 " + std::string(keyword);
    a.snippet = "tumor suppressor";
    SearchResult b = a;
    b.doc_id = "D2";
    b.snippet = "zinc binding";
    return {a, b};
  }

 private:
  SearchTool tool_;
};

struct World {
  std::shared_ptr<FnBackend> backend;
  std::unique_ptr<Gateway> gateway;
  StubEmbedder embedder;
  std::unique_ptr<Retriever> retriever;
  std::unique_ptr<RoundController> controller;

  World(std::vector<std::string> executor, LoopConfig loop = {}, std::vector<std::string> planner = {}) {
    auto exec = std::make_shared<std::vector<std::string>>(std::move(executor));
    auto plans = std::make_shared<std::vector<std::string>>(std::move(planner));
    auto ei = std::make_shared<std::size_t>(0);
    auto pi = std::make_shared<std::size_t>(0);
    backend = std::make_shared<FnBackend>([=](const GenerationRequest& r) -> std::string {
      switch (r.role) {
        case Role::Planner:
          if (plans->empty()) return kPlan;
          return (*plans)[std::min((*pi)++, plans->size() - 1)];
        case Role::Executor:
          return (*exec)[std::min((*ei)++, exec->size() - 1)];
        default:
          return "0.5";
      }
    });
    gateway = std::make_unique<Gateway>(backend);
    SourceSet sources;
    for (auto t : kAllTools) sources[t] = std::make_shared<FixedSource>(t);
    retriever = std::make_unique<Retriever>(*gateway, embedder, sources, RetrieverConfig{});
    controller = std::make_unique<RoundController>(*gateway, *retriever, loop);
  }
};

LoopConfig frozen(int max_rounds = 5) {
  LoopConfig c;
  c.max_rounds = max_rounds;
  c.freeze_time = true;
  return c;
}

}  // namespace

TEST(RunRound, SingleRoundYes) {
  World w({executor_reply("p53 is a tumor suppressor", true)}, frozen());
  std::vector<RawOutput> raw;
  auto rec = w.controller->run_round(MultimodalQuery::make("what is p53", std::nullopt), {}, &raw);
  EXPECT_EQ(rec.index, 1);
  EXPECT_TRUE(rec.decide);
  EXPECT_EQ(rec.answer, "p53 is a tumor suppressor");
  EXPECT_FALSE(rec.next_query.has_value());
  EXPECT_EQ(rec.wall_ms, 0);
  EXPECT_EQ(rec.plan.nodes.size(), 1u);
  EXPECT_EQ(rec.results.items.size(), 2u);
  EXPECT_GT(rec.usage.total(), 0);
  ASSERT_EQ(raw.size(), 2u);
  EXPECT_EQ(raw[0].stage, Stage::Planner);
  EXPECT_EQ(raw[1].stage, Stage::Executor);
}

TEST(RunRound, DecideNoCarriesNextQuery) {
  World w({executor_reply("partial", false, "what about zinc")}, frozen());
  auto rec = w.controller->run_round(MultimodalQuery::make("q", std::nullopt), {});
  EXPECT_FALSE(rec.decide);
  EXPECT_EQ(rec.next_query.value(), "what about zinc");
}

TEST(RunEpisode, ThreadsNextQueryAndPriors) {
  World w({executor_reply("a1", false, "second query"), executor_reply("a2", true)}, frozen());
  auto t = w.controller->run_episode(MultimodalQuery::make("first query", validate_sequence("MKTAYIAKQR")));
  ASSERT_EQ(t.rounds.size(), 2u);
  EXPECT_EQ(t.rounds[0].query, "first query");
  EXPECT_EQ(t.rounds[1].query, "second query");
  EXPECT_EQ(t.final_answer, "a2");
  EXPECT_FALSE(t.exhausted);
  EXPECT_FALSE(t.aborted);
  EXPECT_TRUE(validate_trace(t).empty());
  auto exec = w.backend->requests(Role::Executor);
  ASSERT_EQ(exec.size(), 2u);
  EXPECT_EQ(exec[0].prompt.find("a1"), std::string::npos);
  EXPECT_NE(exec[1].prompt.find("Round 1: a1"), std::string::npos);
  auto plans = w.backend->requests(Role::Planner);
  ASSERT_EQ(plans.size(), 2u);
  EXPECT_NE(plans[1].prompt.find("second query"), std::string::npos);
  EXPECT_NE(plans[1].prompt.find("MKTAYIAKQR"), std::string::npos);
}

TEST(RunEpisode, SingleYesHasOneRound) {
  World w({executor_reply("done", true)}, frozen());
  auto t = w.controller->run_episode(MultimodalQuery::make("q", std::nullopt));
  EXPECT_EQ(t.totals.rounds, 1);
  EXPECT_EQ(t.totals.wall_ms, 0);
  EXPECT_EQ(t.raw_outputs.size(), 2u);
}

TEST(RunEpisode, CapSetsExhausted) {
  World w({executor_reply("again", false, "more")}, frozen(2));
  auto t = w.controller->run_episode(MultimodalQuery::make("q", std::nullopt));
  EXPECT_EQ(t.rounds.size(), 2u);
  EXPECT_TRUE(t.exhausted);
  EXPECT_TRUE(validate_trace(t).empty());
}

TEST(RunEpisode, ExecutorFailureAbortsWithPartialTrace) {
  World w({executor_reply("a1", false, "q2"), "<reason>r</reason><answer>x</answer>"}, frozen());
  auto t = w.controller->run_episode(MultimodalQuery::make("q", std::nullopt), "ep-x");
  EXPECT_TRUE(t.aborted);
  ASSERT_TRUE(t.abort.has_value());
  EXPECT_EQ(t.abort->round, 2);
  EXPECT_EQ(t.abort->code, "ExecutorParseFailure");
  EXPECT_EQ(t.rounds.size(), 1u);
  EXPECT_EQ(t.episode_id, "ep-x");
  // the malformed output is kept for the format reward
  ASSERT_EQ(t.raw_outputs.size(), 4u);
  EXPECT_EQ(t.raw_outputs.back().text, "<reason>r</reason><answer>x</answer>");
  EXPECT_TRUE(validate_trace(t).empty());
}

TEST(RunEpisode, PlanFailureAndAllSourcesFailedAbort) {
  const std::string cyclic =
      R"(<DAG>{"nodes":[{"id":"a","keyword":"k","tool":"Web"}],"edges":[["a","a"]]}</DAG>)";
  World w({executor_reply("x", true)}, frozen(), {cyclic});
  auto t = w.controller->run_episode(MultimodalQuery::make("q", std::nullopt));
  EXPECT_TRUE(t.aborted);
  EXPECT_EQ(t.abort->code, "PlanParseFailure");
  EXPECT_EQ(t.abort->round, 1);
  EXPECT_TRUE(t.rounds.empty());
  EXPECT_EQ(t.raw_outputs.size(), 2u);

  const std::string broken = R"(<DAG>{"nodes":[{"id":"a","keyword":"broken","tool":"Web"}],"edges":[]}</DAG>)";
  World w2({executor_reply("x", true)}, frozen(), {broken});
  auto t2 = w2.controller->run_episode(MultimodalQuery::make("q", std::nullopt));
  EXPECT_TRUE(t2.aborted);
  EXPECT_EQ(t2.abort->code, "AllSourcesFailed");
}

TEST(RunEpisode, ReproducibleSerializedTrace) {
  auto run = [] {
    World w({executor_reply("a1", false, "q2"), executor_reply("a2", true)}, frozen());
    return trace_to_line(w.controller->run_episode(MultimodalQuery::make("q", validate_sequence("MKT"))));
  };
  EXPECT_EQ(run(), run());
}

TEST(EpisodeId, StableAndSequenceSensitive) {
  auto a = MultimodalQuery::make("q", std::nullopt);
  auto b = MultimodalQuery::make("q", validate_sequence("MKT"));
  EXPECT_EQ(default_episode_id(a), default_episode_id(a));
  EXPECT_NE(default_episode_id(a), default_episode_id(b));
  EXPECT_EQ(default_episode_id(a).rfind("ep-", 0), 0u);
}

TEST(LoopConfig, Bounds) {
  LoopConfig c;
  EXPECT_NO_THROW(c.validate());
  c.max_rounds = 0;
  EXPECT_THROW(c.validate(), Error);
}
