#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "protrl/domain.hpp"

namespace protrl {

/// One search backend for one tool. Implementations are safe for
/// concurrent search() calls.
class SourceClient {
 public:
  virtual ~SourceClient() = default;
  virtual SearchTool tool() const = 0;
  /// At most `limit` results, each with source = tool().
  virtual std::vector<SearchResult> search(std::string_view keyword, std::size_t limit) = 0;
};

using SourceSet = std::map<SearchTool, std::shared_ptr<SourceClient>>;

// ---------------------------------------------------------------------------
// Cassettes: {"tool","keyword","results":[{"doc_id","title","snippet","url"}]}

struct Cassette {
  SearchTool tool = SearchTool::Web;
  std::string keyword;  // normalized
  std::vector<SearchResult> results;
};

nlohmann::json cassette_to_json(const Cassette& c);
Cassette cassette_from_json(const nlohmann::json& j);

/// File name used when recording: "<tool>__<slug>__<digest>.json".
std::string cassette_file_name(SearchTool tool, std::string_view normalized_keyword);

/// All *.json cassettes directly under a directory, indexed by
/// (tool, normalized keyword). Read-only after construction.
class CassetteStore {
 public:
  explicit CassetteStore(const std::filesystem::path& dir);

  const Cassette* find(SearchTool tool, std::string_view keyword) const;
  std::size_t size() const noexcept { return cassettes_.size(); }
  const std::filesystem::path& dir() const noexcept { return dir_; }

 private:
  std::filesystem::path dir_;
  std::map<std::pair<SearchTool, std::string>, Cassette> cassettes_;
};

class ReplaySource : public SourceClient {
 public:
  ReplaySource(SearchTool tool, std::shared_ptr<const CassetteStore> store)
      : tool_(tool), store_(std::move(store)) {}
  SearchTool tool() const override { return tool_; }
  /// Throws CassetteMiss when no cassette matches the normalized keyword.
  std::vector<SearchResult> search(std::string_view keyword, std::size_t limit) override;

 private:
  SearchTool tool_;
  std::shared_ptr<const CassetteStore> store_;
};

SourceSet make_replay_sources(const std::filesystem::path& cassette_dir);

/// Wraps a live client and writes one cassette per successful search.
class RecordingSource : public SourceClient {
 public:
  RecordingSource(std::shared_ptr<SourceClient> inner, std::filesystem::path dir)
      : inner_(std::move(inner)), dir_(std::move(dir)) {}
  SearchTool tool() const override { return inner_->tool(); }
  std::vector<SearchResult> search(std::string_view keyword, std::size_t limit) override;

 private:
  std::shared_ptr<SourceClient> inner_;
  std::filesystem::path dir_;
  std::mutex mu_;
};

// ---------------------------------------------------------------------------
// Live clients

class TokenBucket {
 public:
  /// rate <= 0 disables limiting.
  TokenBucket(double rate_per_s, double burst);
  void acquire();

 private:
  std::mutex mu_;
  double rate_;
  double burst_;
  double tokens_;
  std::chrono::steady_clock::time_point last_;
};

struct LiveEndpoints {
  std::string uniprot_base = "https://rest.uniprot.org";
  std::string literature_base = "https://eutils.ncbi.nlm.nih.gov/entrez/eutils";
  std::string web_base;  // generic web-search endpoint, GET ?q=&count=
  std::string web_api_key;
  double timeout_s = 20;
  double uniprot_rps = 5;
  double literature_rps = 3;
  double web_rps = 1;
  int retries = 2;
  double backoff_s = 0.25;
};

class LiveSource : public SourceClient {
 public:
  LiveSource(SearchTool tool, LiveEndpoints endpoints);
  SearchTool tool() const override { return tool_; }
  std::vector<SearchResult> search(std::string_view keyword, std::size_t limit) override;

 private:
  // GET with rate limiting and bounded exponential-backoff retries.
  std::string fetch(const std::string& url);

  SearchTool tool_;
  LiveEndpoints endpoints_;
  TokenBucket bucket_;
};

SourceSet make_live_sources(const LiveEndpoints& endpoints);

// Response parsers, exposed for tests.
std::vector<SearchResult> parse_uniprot_search(const nlohmann::json& j);
std::vector<std::string> parse_esearch_ids(const nlohmann::json& j);
std::vector<SearchResult> parse_pubmed_xml(std::string_view xml);
std::vector<SearchResult> parse_web_results(const nlohmann::json& j);

}  // namespace protrl
