#pragma once

#include <optional>
#include <string>
#include <vector>

#include "protrl/domain.hpp"

namespace protrl {

inline constexpr std::size_t kMaxPlanNodes = 16;

/// Structural checks on a search plan: node count in [1, max_nodes],
/// unique ids, non-empty keywords, edge endpoints exist, acyclic.
/// Reports every violation found.
FormatVerdict validate_plan(const SearchPlan& plan, std::size_t max_nodes = kMaxPlanNodes);

/// Node ids of one directed cycle in visiting order, or nullopt when the
/// edge relation (restricted to edges between existing nodes) is acyclic.
std::optional<std::vector<std::string>> find_cycle(const SearchPlan& plan);

/// Kahn order of node ids; ties resolved by node declaration order.
/// Precondition: the plan is acyclic.
std::vector<std::string> topological_order(const SearchPlan& plan);

}  // namespace protrl
