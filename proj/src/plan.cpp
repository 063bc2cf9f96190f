#include "protrl/plan.hpp"

#include <algorithm>
#include <queue>
#include <unordered_map>
#include <unordered_set>

#include "protrl/text.hpp"

namespace protrl {

namespace {

struct IndexedGraph {
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> in_degree;
};

// First occurrence wins for duplicate ids; dangling edges are dropped.
IndexedGraph index_graph(const SearchPlan& plan) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < plan.nodes.size(); ++i) index.emplace(plan.nodes[i].id, i);
  IndexedGraph g;
  g.out.resize(plan.nodes.size());
  g.in_degree.assign(plan.nodes.size(), 0);
  for (const auto& [from, to] : plan.edges) {
    auto a = index.find(from);
    auto b = index.find(to);
    if (a == index.end() || b == index.end()) continue;
    g.out[a->second].push_back(b->second);
    ++g.in_degree[b->second];
  }
  return g;
}

}  // namespace

std::vector<std::string> topological_order(const SearchPlan& plan) {
  auto g = index_graph(plan);
  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
  for (std::size_t i = 0; i < g.in_degree.size(); ++i)
    if (g.in_degree[i] == 0) ready.push(i);
  std::vector<std::string> order;
  while (!ready.empty()) {
    auto n = ready.top();
    ready.pop();
    order.push_back(plan.nodes[n].id);
    for (auto m : g.out[n])
      if (--g.in_degree[m] == 0) ready.push(m);
  }
  return order;
}

std::optional<std::vector<std::string>> find_cycle(const SearchPlan& plan) {
  auto g = index_graph(plan);
  const auto n = plan.nodes.size();

  // Peel off everything Kahn can remove; what remains contains a cycle.
  std::vector<std::size_t> indeg = g.in_degree;
  std::vector<bool> removed(n, false);
  std::vector<std::size_t> stack;
  for (std::size_t i = 0; i < n; ++i)
    if (indeg[i] == 0) stack.push_back(i);
  while (!stack.empty()) {
    auto v = stack.back();
    stack.pop_back();
    removed[v] = true;
    for (auto m : g.out[v])
      if (--indeg[m] == 0) stack.push_back(m);
  }
  auto start = std::find(removed.begin(), removed.end(), false);
  if (start == removed.end()) return std::nullopt;

  // Every remaining node has a remaining predecessor, so walking
  // backwards must revisit a node; record the walk and cut the loop out.
  std::vector<std::vector<std::size_t>> in(n);
  for (std::size_t v = 0; v < n; ++v)
    for (auto m : g.out[v]) in[m].push_back(v);
  std::vector<std::size_t> walk;
  std::vector<std::ptrdiff_t> pos(n, -1);
  auto v = static_cast<std::size_t>(start - removed.begin());
  while (pos[v] < 0) {
    pos[v] = static_cast<std::ptrdiff_t>(walk.size());
    walk.push_back(v);
    std::size_t next = v;
    for (auto p : in[v]) {
      if (!removed[p]) {
        next = p;
        break;
      }
    }
    v = next;
  }
  std::vector<std::string> cycle;
  for (auto i = walk.size(); i-- > static_cast<std::size_t>(pos[v]);)
    cycle.push_back(plan.nodes[walk[i]].id);
  // rotate so the cycle starts at its earliest-declared node
  auto first = std::min_element(cycle.begin(), cycle.end(), [&](const auto& a, const auto& b) {
    auto ia = std::find_if(plan.nodes.begin(), plan.nodes.end(), [&](auto& x) { return x.id == a; });
    auto ib = std::find_if(plan.nodes.begin(), plan.nodes.end(), [&](auto& x) { return x.id == b; });
    return ia < ib;
  });
  std::rotate(cycle.begin(), first, cycle.end());
  return cycle;
}

FormatVerdict validate_plan(const SearchPlan& plan, std::size_t max_nodes) {
  FormatVerdict v;
  if (plan.nodes.empty()) v.add(ErrorCode::EmptyPlan, "plan has no nodes");
  if (plan.nodes.size() > max_nodes)
    v.add(ErrorCode::TooManyNodes, "plan has " + std::to_string(plan.nodes.size()) +
                                       " nodes; limit is " + std::to_string(max_nodes));
  std::unordered_set<std::string> ids;
  for (const auto& node : plan.nodes) {
    if (node.id.empty()) v.add(ErrorCode::MalformedBody, "node with empty id");
    if (!ids.insert(node.id).second)
      v.add(ErrorCode::DuplicateNodeId, "duplicate node id \"" + node.id + "\"");
    if (text::collapse_whitespace_lower(node.keyword).empty())
      v.add(ErrorCode::EmptyKeyword, "node \"" + node.id + "\" has an empty keyword");
  }
  for (const auto& [from, to] : plan.edges) {
    for (const auto* end : {&from, &to}) {
      if (!ids.count(*end)) v.add(ErrorCode::DanglingEdge, "edge references unknown node \"" + *end + "\"");
    }
  }
  if (auto cycle = find_cycle(plan)) {
    std::string ids_list;
    for (const auto& id : *cycle) ids_list += (ids_list.empty() ? "" : ",") + id;
    v.add(ErrorCode::CyclicPlan, "cycle through [" + ids_list + "]");
  }
  return v;
}

}  // namespace protrl
