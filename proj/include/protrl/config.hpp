#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "protrl/controller.hpp"
#include "protrl/embedding.hpp"
#include "protrl/gateway.hpp"
#include "protrl/pipeline.hpp"
#include "protrl/retriever.hpp"
#include "protrl/reward.hpp"
#include "protrl/sources.hpp"

namespace protrl {

enum class BackendMode { Scripted, Remote };
enum class EmbeddingMode { Stub, Sidecar };
enum class RetrievalMode { Replay, Live, Record };

struct BackendSection {
  BackendMode mode = BackendMode::Scripted;
  std::filesystem::path manifest;  // scripted
  std::string url;                 // remote
  std::string auth_env;            // name of the env var holding the bearer token
  double timeout_s = 60;
};

struct EmbeddingSection {
  EmbeddingMode mode = EmbeddingMode::Stub;
  std::string url;
  double timeout_s = 30;
};

struct RetrievalSection {
  RetrieverConfig retriever;
  RetrievalMode mode = RetrievalMode::Replay;
  std::filesystem::path cassette_dir;
  LiveEndpoints endpoints;
  std::string web_api_key_env;
};

struct DataSection {
  std::filesystem::path entries_dir;  // replayed UniProt entries; empty = live
  PipelineConfig pipeline;
};

struct EngineConfig {
  BackendSection backend;
  EmbeddingSection embedding;
  RetrievalSection retrieval;
  LoopConfig loop;
  RewardConfig reward;
  DataSection data;
  std::size_t bench_workers = 1;

  /// Throws ConfigError on bounds or mode inconsistencies.
  void validate() const;
};

/// Parses a config document. Relative paths resolve against `base_dir`.
/// Unknown keys are rejected.
EngineConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);

/// Throws ConfigError naming the path when the file is missing or invalid.
EngineConfig load_config(const std::filesystem::path& path);

/// Live collaborators assembled from a config.
struct Engine {
  std::shared_ptr<Backend> backend;
  std::unique_ptr<Gateway> gateway;
  std::unique_ptr<Embedder> embedder;
  std::unique_ptr<Retriever> retriever;
  std::unique_ptr<RoundController> controller;
};

/// `offline` forces replay retrieval and stub embeddings and refuses a
/// remote backend; it requires retrieval.cassette_dir.
Engine build_engine(const EngineConfig& config, bool offline = false);
Engine build_engine(const EngineConfig& config, std::shared_ptr<Backend> backend, bool offline = false);

std::shared_ptr<Backend> make_backend(const BackendSection& section);
SourceSet make_sources(const RetrievalSection& section);

}  // namespace protrl
