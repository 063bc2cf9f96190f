#pragma once

#include <string>
#include <vector>

#include "protrl/domain.hpp"
#include "protrl/gateway.hpp"
#include "protrl/plan.hpp"

namespace protrl {

/// What happened while planning; filled even when build_plan throws.
struct PlanLog {
  std::vector<std::string> outputs;  // raw backend text per attempt
  Usage usage;
  int attempts = 0;
};

/// Appends the violation list of a failed attempt to the original prompt.
std::string build_repair_prompt(const std::string& prompt, const FormatVerdict& verdict);

class Planner {
 public:
  explicit Planner(const Gateway& gateway, int repair_retries = 1)
      : gateway_(gateway), repair_retries_(repair_retries) {}

  /// Throws PlanParseFailure carrying the last attempt's verdict once the
  /// repair retries are used up.
  SearchPlan build_plan(const MultimodalQuery& query, PlanLog* log = nullptr) const;

 private:
  const Gateway& gateway_;
  int repair_retries_;
};

}  // namespace protrl
