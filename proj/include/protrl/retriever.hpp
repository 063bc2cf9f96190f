#pragma once

#include <memory>
#include <vector>

#include "protrl/domain.hpp"
#include "protrl/embedding.hpp"
#include "protrl/gateway.hpp"
#include "protrl/sources.hpp"

namespace protrl {

struct RetrieverConfig {
  std::size_t k = 3;
  double alpha = 0.5;
  std::size_t max_concurrency = 8;
  std::size_t per_node_limit = 5;

  void validate() const;
};

/// alpha * vec + (1 - alpha) * judge. Throws OutOfRange unless all three are in [0, 1].
double fuse_scores(double vec, double judge, double alpha);

/// Ranking order: fused score descending, then source priority
/// (UniProt, Literature, Web), then doc_id ascending. Unset scores rank last.
bool ranks_before(const SearchResult& a, const SearchResult& b);

/// First k items under ranks_before; items that compare equal keep input order.
std::vector<SearchResult> rank_topk(std::vector<SearchResult> items, std::size_t k);

/// Text compared with the query for the vector signal: title and snippet
/// joined by one space (empty parts dropped).
std::string result_text(const SearchResult& r);

struct RetrievalOutcome {
  RankedResults results;
  Usage usage;  // judge calls
};

class Retriever {
 public:
  Retriever(const Gateway& gateway, Embedder& embedder, SourceSet sources, RetrieverConfig config);

  std::vector<SearchResult> search_source(const PlanNode& node) const;

  /// Sets vec_score, judge_score and fused_score. Judge usage is added to `usage` when given.
  SearchResult score_result(const MultimodalQuery& query, SearchResult result, Usage* usage = nullptr) const;

  /// Searches every node (bounded parallelism), deduplicates by
  /// (source, doc_id) keeping the first node's copy, scores, and keeps
  /// the top K. Failed nodes become warnings; AllSourcesFailed only when
  /// no node succeeded.
  RetrievalOutcome execute_plan(const MultimodalQuery& query, const SearchPlan& plan) const;

  const RetrieverConfig& config() const noexcept { return config_; }

 private:
  const Gateway& gateway_;
  Embedder& embedder_;
  SourceSet sources_;
  RetrieverConfig config_;
};

}  // namespace protrl
