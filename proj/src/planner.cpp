#include "protrl/planner.hpp"

#include "protrl/protocol.hpp"

namespace protrl {

std::string build_repair_prompt(const std::string& prompt, const FormatVerdict& verdict) {
  std::string p = prompt;
  p += "\nYour previous output was rejected:\n";
  for (const auto& v : verdict.violations) p += "- " + v.code + ": " + v.message + "\n";
  p += "Return a corrected <DAG> block.\n";
  return p;
}

SearchPlan Planner::build_plan(const MultimodalQuery& query, PlanLog* log) const {
  PlanLog local;
  PlanLog& out = log ? *log : local;
  const auto base = build_planner_prompt(query, render_sequence_block(query.sequence));
  auto prompt = base;
  FormatVerdict last;
  for (int attempt = 0; attempt <= repair_retries_; ++attempt) {
    auto res = gateway_.generate(Role::Planner, prompt);
    ++out.attempts;
    out.outputs.push_back(res.text);
    out.usage += res.usage;
    last = protocol::check_format(res.text, Stage::Planner);
    if (last.valid) return protocol::parse_planner_output(res.text);
    prompt = build_repair_prompt(base, last);
  }
  std::string codes;
  for (const auto& v : last.violations) codes += (codes.empty() ? "" : ", ") + v.code;
  throw Error(ErrorCode::PlanParseFailure,
              "planner output invalid after " + std::to_string(out.attempts) + " attempt(s): " + codes, last);
}

}  // namespace protrl
