#include <gtest/gtest.h>

#include "protrl/plan.hpp"
#include "protrl/planner.hpp"
#include "protrl/protocol.hpp"
#include "support/test_support.hpp"

using namespace protrl;
using protrl::testing::FnBackend;

namespace {

SearchPlan chain(int n) {
  SearchPlan p;
  for (int i = 0; i < n; ++i) p.nodes.push_back({"n" + std::to_string(i), "kw" + std::to_string(i), SearchTool::Web});
  for (int i = 0; i + 1 < n; ++i) p.edges.emplace_back("n" + std::to_string(i), "n" + std::to_string(i + 1));
  return p;
}

const char* kThreeNode =
    R"(<DAG>{"nodes":[{"id":"n1","keyword":"TP53","tool":"UniProt"},{"id":"n2","keyword":"TP53 R175H variant","tool":"Literature"},{"id":"n3","keyword":"Li-Fraumeni syndrome","tool":"Web"}],"edges":[["n1","n2"],["n1","n3"]]}</DAG>)";
const char* kCyclic =
    R"(<DAG>{"nodes":[{"id":"n1","keyword":"TP53","tool":"UniProt"},{"id":"n2","keyword":"MDM2","tool":"Web"}],"edges":[["n1","n2"],["n2","n1"]]}</DAG>)";

}  // namespace

TEST(ValidatePlan, SingleNodeValid) {
  EXPECT_TRUE(validate_plan(chain(1)).valid);
}

TEST(ValidatePlan, SeventeenNodesTooMany) {
  auto v = validate_plan(chain(17));
  EXPECT_FALSE(v.valid);
  EXPECT_TRUE(v.has(ErrorCode::TooManyNodes));
  EXPECT_TRUE(validate_plan(chain(16)).valid);
}

TEST(ValidatePlan, ReportsEveryProblem) {
  SearchPlan p;
  EXPECT_TRUE(validate_plan(p).has(ErrorCode::EmptyPlan));
  p = chain(3);
  p.nodes[2].id = "n0";
  p.nodes[1].keyword = "  ";
  p.edges.emplace_back("n1", "ghost");
  auto v = validate_plan(p);
  EXPECT_TRUE(v.has(ErrorCode::DuplicateNodeId));
  EXPECT_TRUE(v.has(ErrorCode::EmptyKeyword));
  EXPECT_TRUE(v.has(ErrorCode::DanglingEdge));
}

TEST(ValidatePlan, CycleDetectedWithIds) {
  auto p = chain(4);
  p.edges.emplace_back("n3", "n1");
  auto v = validate_plan(p);
  EXPECT_TRUE(v.has(ErrorCode::CyclicPlan));
  auto cyc = find_cycle(p);
  ASSERT_TRUE(cyc.has_value());
  EXPECT_EQ(cyc->size(), 3u);
  auto self = chain(1);
  self.edges.emplace_back("n0", "n0");
  EXPECT_TRUE(validate_plan(self).has(ErrorCode::CyclicPlan));
}

TEST(TopologicalOrder, RespectsEdgesAndDeclarationOrder) {
  SearchPlan p = chain(3);
  p.edges = {{"n2", "n0"}};
  EXPECT_EQ(topological_order(p), (std::vector<std::string>{"n1", "n2", "n0"}));
}

TEST(Planner, ScriptedThreeNodePlan) {
  auto backend = std::make_shared<FnBackend>([](const GenerationRequest&) { return std::string(kThreeNode); });
  Gateway gw(backend);
  Planner planner(gw);
  PlanLog log;
  auto plan = planner.build_plan(MultimodalQuery::make("What does R175H do to p53?", std::nullopt), &log);
  ASSERT_EQ(plan.nodes.size(), 3u);
  EXPECT_EQ(plan.nodes[0].tool, SearchTool::UniProt);
  EXPECT_EQ(plan.nodes[1].keyword, "TP53 R175H variant");
  EXPECT_EQ(plan.nodes[1].tool, SearchTool::Literature);
  EXPECT_EQ(plan.nodes[2].keyword, "Li-Fraumeni syndrome");
  EXPECT_EQ(plan.nodes[2].tool, SearchTool::Web);
  EXPECT_TRUE(validate_plan(plan).valid);
  EXPECT_EQ(log.attempts, 1);
  EXPECT_EQ(backend->requests(Role::Planner).size(), 1u);
}

TEST(Planner, CyclicThenFixedUsesRetry) {
  int calls = 0;
  auto backend = std::make_shared<FnBackend>([&](const GenerationRequest&) {
    return std::string(calls++ == 0 ? kCyclic : kThreeNode);
  });
  Gateway gw(backend);
  PlanLog log;
  auto plan = Planner(gw).build_plan(MultimodalQuery::make("q", std::nullopt), &log);
  EXPECT_EQ(plan.nodes.size(), 3u);
  EXPECT_EQ(log.attempts, 2);
  ASSERT_EQ(log.outputs.size(), 2u);
  auto reqs = backend->requests(Role::Planner);
  ASSERT_EQ(reqs.size(), 2u);
  EXPECT_EQ(reqs[1].prompt.rfind(reqs[0].prompt, 0), 0u);
  EXPECT_NE(reqs[1].prompt.find("CyclicPlan"), std::string::npos);
}

TEST(Planner, TwoCyclicPlansFail) {
  auto backend = std::make_shared<FnBackend>([](const GenerationRequest&) { return std::string(kCyclic); });
  Gateway gw(backend);
  PlanLog log;
  try {
    Planner(gw).build_plan(MultimodalQuery::make("q", std::nullopt), &log);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::PlanParseFailure);
    ASSERT_TRUE(e.verdict().has_value());
    EXPECT_TRUE(e.verdict()->has(ErrorCode::CyclicPlan));
  }
  EXPECT_EQ(log.attempts, 2);
  EXPECT_EQ(log.outputs.size(), 2u);
}

TEST(Planner, RetryCountConfigurable) {
  auto backend = std::make_shared<FnBackend>([](const GenerationRequest&) { return std::string("nothing"); });
  Gateway gw(backend);
  EXPECT_THROW(Planner(gw, 3).build_plan(MultimodalQuery::make("q", std::nullopt)), Error);
  EXPECT_EQ(backend->requests().size(), 4u);
}

TEST(Planner, DeterministicForEqualQueries) {
  auto backend = std::make_shared<FnBackend>([](const GenerationRequest&) { return std::string(kThreeNode); });
  Gateway gw(backend);
  Planner planner(gw);
  auto q = MultimodalQuery::make("q", validate_sequence("MKT"));
  EXPECT_EQ(planner.build_plan(q), planner.build_plan(q));
}
