#include "protrl/retriever.hpp"

#include <algorithm>
#include <set>

#include "protrl/parallel.hpp"
#include "protrl/text.hpp"

namespace protrl {

void RetrieverConfig::validate() const {
  if (k < 1) throw Error(ErrorCode::ConfigError, "retriever.k must be >= 1");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(ErrorCode::ConfigError, "retriever.alpha must be in [0,1]");
  if (max_concurrency < 1) throw Error(ErrorCode::ConfigError, "retriever.max_concurrency must be >= 1");
  if (per_node_limit < 1) throw Error(ErrorCode::ConfigError, "retriever.per_node_limit must be >= 1");
}

double fuse_scores(double vec, double judge, double alpha) {
  auto in_unit = [](double x) { return x >= 0.0 && x <= 1.0; };
  if (!in_unit(vec) || !in_unit(judge) || !in_unit(alpha))
    throw Error(ErrorCode::OutOfRange, "fusion inputs must lie in [0,1]");
  return alpha * vec + (1.0 - alpha) * judge;
}

bool ranks_before(const SearchResult& a, const SearchResult& b) {
  const double fa = a.fused_score.value_or(-1.0);
  const double fb = b.fused_score.value_or(-1.0);
  if (fa != fb) return fa > fb;
  if (a.source != b.source) return a.source < b.source;
  return a.doc_id < b.doc_id;
}

std::vector<SearchResult> rank_topk(std::vector<SearchResult> items, std::size_t k) {
  std::stable_sort(items.begin(), items.end(), ranks_before);
  items.resize(std::min(k, items.size()));
  return items;
}

std::string result_text(const SearchResult& r) {
  const auto title = text::trim(r.title);
  const auto snippet = text::trim(r.snippet);
  if (title.empty()) return snippet;
  if (snippet.empty()) return title;
  return title + " " + snippet;
}

Retriever::Retriever(const Gateway& gateway, Embedder& embedder, SourceSet sources, RetrieverConfig config)
    : gateway_(gateway), embedder_(embedder), sources_(std::move(sources)), config_(config) {
  config_.validate();
}

std::vector<SearchResult> Retriever::search_source(const PlanNode& node) const {
  auto it = sources_.find(node.tool);
  if (it == sources_.end() || !it->second)
    throw Error(ErrorCode::SourceUnavailable, "no client for " + std::string(to_string(node.tool)));
  auto results = it->second->search(node.keyword, config_.per_node_limit);
  if (results.size() > config_.per_node_limit) results.resize(config_.per_node_limit);
  for (auto& r : results) r.source = node.tool;
  return results;
}

SearchResult Retriever::score_result(const MultimodalQuery& query, SearchResult result, Usage* usage) const {
  const auto doc = result_text(result);
  if (doc.empty()) throw Error(ErrorCode::InvalidArgument, "result " + result.doc_id + " has no title or snippet");
  result.vec_score = vector_relevance(embedder_.embed_text(query.text), embedder_.embed_text(doc));
  auto judged = gateway_.judge_relevance(query, result);
  result.judge_score = judged.score;
  result.fused_score = fuse_scores(*result.vec_score, *result.judge_score, config_.alpha);
  if (usage) *usage += judged.usage;
  return result;
}

RetrievalOutcome Retriever::execute_plan(const MultimodalQuery& query, const SearchPlan& plan) const {
  std::vector<std::vector<SearchResult>> per_node(plan.nodes.size());
  auto node_errors = parallel_for(plan.nodes.size(), config_.max_concurrency,
                                  [&](std::size_t i) { per_node[i] = search_source(plan.nodes[i]); });

  RetrievalOutcome out;
  out.results.round_index = query.round_index;
  std::size_t failed = 0;
  for (std::size_t i = 0; i < node_errors.size(); ++i) {
    if (!node_errors[i]) continue;
    ++failed;
    std::string what;
    try {
      std::rethrow_exception(node_errors[i]);
    } catch (const std::exception& e) {
      what = e.what();
    }
    const auto& n = plan.nodes[i];
    out.results.warnings.push_back("node " + n.id + " (" + std::string(to_string(n.tool)) + " \"" + n.keyword +
                                   "\"): " + what);
  }
  if (!plan.nodes.empty() && failed == plan.nodes.size()) {
    std::string detail;
    for (const auto& w : out.results.warnings) detail += "\n  " + w;
    throw Error(ErrorCode::AllSourcesFailed, "every plan node failed:" + detail);
  }

  std::vector<SearchResult> unique;
  std::set<std::pair<SearchTool, std::string>> seen;
  for (auto& results : per_node)
    for (auto& r : results)
      if (seen.emplace(r.source, r.doc_id).second) unique.push_back(std::move(r));

  std::vector<Usage> usages(unique.size());
  auto score_errors = parallel_for(unique.size(), config_.max_concurrency, [&](std::size_t i) {
    unique[i] = score_result(query, std::move(unique[i]), &usages[i]);
  });
  for (auto& e : score_errors)
    if (e) std::rethrow_exception(e);
  for (const auto& u : usages) out.usage += u;

  out.results.items = rank_topk(std::move(unique), config_.k);
  return out;
}

}  // namespace protrl
