#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include "protrl/protocol.hpp"

using namespace protrl;
using namespace protrl::protocol;

namespace {

ErrorCode parse_code(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::InvalidArgument;
}

bool has_code(const FormatVerdict& v, const std::string& code) {
  for (const auto& x : v.violations)
    if (x.code == code) return true;
  return false;
}

const std::string kTwoNodeBody =
    R"({"nodes":[{"id":"n1","keyword":"TP53","tool":"UniProt"},{"id":"n2","keyword":"R175H","tool":"Literature"}],"edges":[["n1","n2"]]})";

}  // namespace

TEST(PlannerOutput, MinimalPlan) {
  auto p = parse_planner_output(R"(<DAG>{"nodes":[{"id":"n1","keyword":"TP53","tool":"UniProt"}],"edges":[]}</DAG>)");
  ASSERT_EQ(p.nodes.size(), 1u);
  EXPECT_TRUE(p.edges.empty());
  EXPECT_EQ(p.nodes[0].keyword, "TP53");
  EXPECT_EQ(p.nodes[0].tool, SearchTool::UniProt);
}

TEST(PlannerOutput, TwoCycleNamesBothNodes) {
  const auto text =
      R"(<DAG>{"nodes":[{"id":"n1","keyword":"a","tool":"Web"},{"id":"n2","keyword":"b","tool":"Web"}],"edges":[["n1","n2"],["n2","n1"]]}</DAG>)";
  try {
    parse_planner_output(text);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::CyclicPlan);
    const std::string msg = e.what();
    EXPECT_NE(msg.find("n1"), std::string::npos);
    EXPECT_NE(msg.find("n2"), std::string::npos);
  }
}

TEST(PlannerOutput, Errors) {
  EXPECT_EQ(parse_code([] {
              parse_planner_output(R"(<DAG>{"nodes":[{"id":"n1","keyword":"a","tool":"Wikipedia"}],"edges":[]}</DAG>)");
            }),
            ErrorCode::UnknownTool);
  EXPECT_EQ(parse_code([] { parse_planner_output("no tags here"); }), ErrorCode::MissingTag);
  EXPECT_EQ(parse_code([&] { parse_planner_output("<DAG>" + kTwoNodeBody + "</DAG><DAG>" + kTwoNodeBody + "</DAG>"); }),
            ErrorCode::DuplicateTag);
  EXPECT_EQ(parse_code([] { parse_planner_output("<DAG>{not json</DAG>"); }), ErrorCode::MalformedBody);
  EXPECT_EQ(parse_code([] {
              parse_planner_output(R"(<DAG>{"nodes":[{"id":"n1","keyword":"a","tool":"Web"}],"edges":[["n1","zz"]]}</DAG>)");
            }),
            ErrorCode::DanglingEdge);
}

TEST(PlannerOutput, SurroundingProseIgnored) {
  const auto bare = parse_planner_output("<DAG>" + kTwoNodeBody + "</DAG>");
  const auto wrapped =
      parse_planner_output("Let me think <b>first</b>.\n<DAG>" + kTwoNodeBody + "</DAG>\nDone, see <i>above</i>.");
  EXPECT_EQ(bare, wrapped);
}

TEST(PlannerOutput, SerializeRoundTrip) {
  auto p = parse_plan_body(kTwoNodeBody);
  EXPECT_EQ(parse_planner_output(serialize_plan(p)), p);
}

TEST(ExecutorOutput, YesWithoutNextQuery) {
  auto out = parse_executor_output("<reason>R</reason><answer>A</answer><decide>yes</decide>");
  EXPECT_EQ(out.reason, "R");
  EXPECT_EQ(out.answer, "A");
  EXPECT_TRUE(out.decide);
  EXPECT_FALSE(out.next_query.has_value());
}

TEST(ExecutorOutput, Errors) {
  EXPECT_EQ(parse_code([] { parse_executor_output("<reason>R</reason><answer>A</answer><decide>no</decide>"); }),
            ErrorCode::MissingNextQuery);
  try {
    parse_executor_output("<reason>R</reason><answer>A</answer><decide>maybe</decide>");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidDecide);
    EXPECT_NE(std::string(e.what()).find("maybe"), std::string::npos);
  }
  EXPECT_EQ(parse_code([] {
              parse_executor_output(
                  "<reason>R</reason><answer>A</answer><decide>yes</decide><next_query>x</next_query>");
            }),
            ErrorCode::UnexpectedNextQuery);
  EXPECT_EQ(parse_code([] { parse_executor_output("<reason>R</reason><decide>yes</decide>"); }),
            ErrorCode::MissingTag);
  EXPECT_EQ(parse_code([] {
              parse_executor_output("<reason>R</reason><reason>R</reason><answer>A</answer><decide>yes</decide>");
            }),
            ErrorCode::DuplicateTag);
}

TEST(ExecutorOutput, DecideTrimmedCaseInsensitive) {
  auto out = parse_executor_output("<reason>R</reason><answer>A</answer><decide>  NO \n</decide><next_query>q2</next_query>");
  EXPECT_FALSE(out.decide);
  EXPECT_EQ(out.next_query.value(), "q2");
  EXPECT_EQ(parse_executor_output(serialize_executor_output(out)), out);
}

TEST(SearchResultsBlock, Empty) {
  RankedResults r;
  EXPECT_EQ(serialize_search_results(r), "<search_results>[]</search_results>");
}

TEST(SearchResultsBlock, RanksFollowOrder) {
  RankedResults r;
  SearchResult a{SearchTool::UniProt, "P04637", "p53", "tumor suppressor", std::nullopt, 0.9, 0.9, 0.9};
  SearchResult b{SearchTool::Web, "https://x", "page", "text", std::nullopt, 0.4, 0.4, 0.4};
  r.items = {a, b};
  const auto s = serialize_search_results(r);
  const auto open = std::string("<search_results>");
  ASSERT_EQ(s.rfind(open, 0), 0u);
  auto arr = nlohmann::json::parse(s.substr(open.size(), s.size() - open.size() - open.size() - 1));
  ASSERT_EQ(arr.size(), 2u);
  EXPECT_EQ(arr[0]["rank"], 1);
  EXPECT_EQ(arr[0]["id"], "P04637");
  EXPECT_EQ(arr[0]["source"], "UniProt");
  EXPECT_EQ(arr[1]["rank"], 2);
  EXPECT_DOUBLE_EQ(arr[1]["score"].get<double>(), 0.4);
  auto back = parse_search_results(s);
  ASSERT_EQ(back.items.size(), 2u);
  EXPECT_EQ(back.items[0].doc_id, "P04637");
  EXPECT_EQ(back.items[1].fused_score, 0.4);
}

TEST(CheckFormat, WellFormedExecutor) {
  auto v = check_format("<reason>R</reason><answer>A</answer><decide>yes</decide>", Stage::Executor);
  EXPECT_TRUE(v.valid);
  EXPECT_TRUE(v.violations.empty());
}

TEST(CheckFormat, MissingCloseAnswerIsUnclosedTag) {
  auto v = check_format("<reason>R</reason><answer>A<decide>yes</decide>", Stage::Executor);
  EXPECT_FALSE(v.valid);
  EXPECT_TRUE(has_code(v, "UnclosedTag"));
}

TEST(CheckFormat, ReportsEveryDefectInOnePass) {
  // three independent defects: no reason, bad decide, unexpected stray close
  auto v = check_format("<answer>A</answer><decide>perhaps</decide></reason>", Stage::Executor);
  EXPECT_FALSE(v.valid);
  EXPECT_GE(v.violations.size(), 3u);
  EXPECT_TRUE(has_code(v, "InvalidDecide"));
}

TEST(CheckFormat, NestingIsAViolation) {
  auto v = check_format("<reason>R <answer>A</answer></reason><decide>yes</decide>", Stage::Executor);
  EXPECT_FALSE(v.valid);
  EXPECT_TRUE(has_code(v, "NestedTag"));
}

TEST(CheckFormat, UnknownTagsIgnored) {
  auto v = check_format("<think>hmm</think><reason>R</reason><answer><b>A</b></answer><decide>yes</decide>",
                        Stage::Executor);
  EXPECT_TRUE(v.valid);
}

TEST(CheckFormat, PlannerAgreesWithParser) {
  for (const std::string text :
       {"<DAG>" + kTwoNodeBody + "</DAG>", std::string("<DAG>{}</DAG>"), std::string("<DAG>"),
        std::string(R"(<DAG>{"nodes":[{"id":"a","keyword":" ","tool":"Web"}],"edges":[]}</DAG>)")}) {
    bool parsed = true;
    try {
      parse_planner_output(text);
    } catch (const Error&) {
      parsed = false;
    }
    EXPECT_EQ(check_format(text, Stage::Planner).valid, parsed) << text;
  }
}

TEST(Parsing, TotalOnArbitraryBytes) {
  std::string junk;
  for (int i = 0; i < 256; ++i) junk.push_back(static_cast<char>(i));
  for (const std::string t : {junk, std::string("<"), std::string("</"), std::string("<DAG"),
                              std::string("<decide></decide></decide>"), std::string("<<DAG>>")}) {
    EXPECT_NO_THROW(check_format(t, Stage::Planner));
    EXPECT_NO_THROW(check_format(t, Stage::Executor));
    try {
      parse_executor_output(t);
    } catch (const Error&) {
    }
    try {
      parse_planner_output(t);
    } catch (const Error&) {
    }
  }
}

TEST(ExtractSingle, NonProtocolTag) {
  EXPECT_EQ(extract_single("x <query>What?</query> y", "query").value(), "What?");
  EXPECT_FALSE(extract_single("<query>a</query><query>b</query>", "query").has_value());
  EXPECT_FALSE(extract_single("<query>a", "query").has_value());
  EXPECT_FALSE(extract_single("nothing", "query").has_value());
}
