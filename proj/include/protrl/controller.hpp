#pragma once

#include <string>
#include <vector>

#include "protrl/domain.hpp"
#include "protrl/gateway.hpp"
#include "protrl/planner.hpp"
#include "protrl/retriever.hpp"

namespace protrl {

struct LoopConfig {
  int max_rounds = 5;
  bool freeze_time = false;  // zero every wall_ms; for reproducible traces
  int plan_retries = 1;

  void validate() const;
};

/// "ep-" + digest of query text and sequence; stable across runs.
std::string default_episode_id(const MultimodalQuery& query);

class RoundController {
 public:
  RoundController(const Gateway& gateway, const Retriever& retriever, LoopConfig config);

  /// One plan -> retrieve -> reason cycle. Raw planner/executor outputs are
  /// appended to `raw` (when given) before any parse failure is thrown, so
  /// they survive into aborted traces.
  RoundRecord run_round(const MultimodalQuery& query, const std::vector<std::string>& prior_answers,
                        std::vector<RawOutput>* raw = nullptr) const;

  /// Runs rounds until decide=yes or max_rounds. Round-level failures do
  /// not escape: the partial trace comes back with aborted=true and the
  /// cause in `abort`.
  EpisodeTrace run_episode(const MultimodalQuery& query, std::string episode_id = {}) const;

  const LoopConfig& config() const noexcept { return config_; }

 private:
  const Gateway& gateway_;
  const Retriever& retriever_;
  LoopConfig config_;
  Planner planner_;
};

}  // namespace protrl
