#include "protrl/config.hpp"

#include <cstdlib>
#include <set>

#include "protrl/serialization.hpp"

namespace protrl {

namespace {

// Reads one object section, rejecting keys it was never asked about.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw Error(ErrorCode::ConfigError, name_ + " must be an object");
  }

  template <typename T>
  T get(const std::string& key, T fallback) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end() || it->is_null()) return fallback;
    try {
      return it->get<T>();
    } catch (const json::exception&) {
      throw Error(ErrorCode::ConfigError, name_ + "." + key + " has the wrong type");
    }
  }

  std::optional<json> sub(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end() || it->is_null()) return std::nullopt;
    return std::optional<json>(std::in_place, *it);
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw Error(ErrorCode::ConfigError, "unknown key " + name_ + "." + k);
  }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

std::filesystem::path resolve(const std::string& p, const std::filesystem::path& base) {
  if (p.empty()) return {};
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

std::size_t non_negative(long long v, const std::string& what) {
  if (v < 0) throw Error(ErrorCode::ConfigError, what + " must be >= 0");
  return static_cast<std::size_t>(v);
}

}  // namespace

EngineConfig config_from_json(const json& doc, const std::filesystem::path& base) {
  EngineConfig c;
  Section root(doc, "config");

  if (auto j = root.sub("backend")) {
    Section s(*j, "backend");
    const auto mode = s.get<std::string>("mode", "scripted");
    if (mode == "scripted") c.backend.mode = BackendMode::Scripted;
    else if (mode == "remote") c.backend.mode = BackendMode::Remote;
    else throw Error(ErrorCode::ConfigError, "backend.mode must be \"scripted\" or \"remote\"");
    c.backend.manifest = resolve(s.get<std::string>("manifest", ""), base);
    c.backend.url = s.get<std::string>("url", "");
    c.backend.auth_env = s.get<std::string>("auth_env", "");
    c.backend.timeout_s = s.get<double>("timeout_s", c.backend.timeout_s);
    s.finish();
  }

  if (auto j = root.sub("embedding")) {
    Section s(*j, "embedding");
    const auto mode = s.get<std::string>("mode", "stub");
    if (mode == "stub") c.embedding.mode = EmbeddingMode::Stub;
    else if (mode == "sidecar") c.embedding.mode = EmbeddingMode::Sidecar;
    else throw Error(ErrorCode::ConfigError, "embedding.mode must be \"stub\" or \"sidecar\"");
    c.embedding.url = s.get<std::string>("url", "");
    c.embedding.timeout_s = s.get<double>("timeout_s", c.embedding.timeout_s);
    s.finish();
  }

  if (auto j = root.sub("retriever")) {
    Section s(*j, "retriever");
    auto& r = c.retrieval.retriever;
    r.k = non_negative(s.get<long long>("k", static_cast<long long>(r.k)), "retriever.k");
    r.alpha = s.get<double>("alpha", r.alpha);
    r.max_concurrency =
        non_negative(s.get<long long>("max_concurrency", static_cast<long long>(r.max_concurrency)),
                     "retriever.max_concurrency");
    r.per_node_limit = non_negative(
        s.get<long long>("per_node_limit", static_cast<long long>(r.per_node_limit)), "retriever.per_node_limit");
    const auto mode = s.get<std::string>("mode", "replay");
    if (mode == "replay") c.retrieval.mode = RetrievalMode::Replay;
    else if (mode == "live") c.retrieval.mode = RetrievalMode::Live;
    else if (mode == "record") c.retrieval.mode = RetrievalMode::Record;
    else throw Error(ErrorCode::ConfigError, "retriever.mode must be \"replay\", \"live\" or \"record\"");
    c.retrieval.cassette_dir = resolve(s.get<std::string>("cassette_dir", ""), base);
    if (auto ej = s.sub("endpoints")) {
      Section e(*ej, "retriever.endpoints");
      auto& ep = c.retrieval.endpoints;
      ep.uniprot_base = e.get<std::string>("uniprot_base", ep.uniprot_base);
      ep.literature_base = e.get<std::string>("literature_base", ep.literature_base);
      ep.web_base = e.get<std::string>("web_base", ep.web_base);
      c.retrieval.web_api_key_env = e.get<std::string>("web_api_key_env", "");
      ep.timeout_s = e.get<double>("timeout_s", ep.timeout_s);
      ep.uniprot_rps = e.get<double>("uniprot_rps", ep.uniprot_rps);
      ep.literature_rps = e.get<double>("literature_rps", ep.literature_rps);
      ep.web_rps = e.get<double>("web_rps", ep.web_rps);
      ep.retries = e.get<int>("retries", ep.retries);
      ep.backoff_s = e.get<double>("backoff_s", ep.backoff_s);
      e.finish();
    }
    s.finish();
  }

  if (auto j = root.sub("loop")) {
    Section s(*j, "loop");
    c.loop.max_rounds = s.get<int>("max_rounds", c.loop.max_rounds);
    c.loop.freeze_time = s.get<bool>("freeze_time", c.loop.freeze_time);
    c.loop.plan_retries = s.get<int>("plan_retries", c.loop.plan_retries);
    s.finish();
  }

  if (auto j = root.sub("reward")) {
    Section s(*j, "reward");
    if (auto wj = s.sub("weights")) {
      Section w(*wj, "reward.weights");
      auto& rw = c.reward.weights;
      rw.lambda_ans = w.get<double>("lambda_ans", rw.lambda_ans);
      rw.lambda_kw = w.get<double>("lambda_kw", rw.lambda_kw);
      rw.lambda_tool = w.get<double>("lambda_tool", rw.lambda_tool);
      rw.lambda_fmt = w.get<double>("lambda_fmt", rw.lambda_fmt);
      w.finish();
    }
    c.reward.tau = s.get<double>("tau", c.reward.tau);
    c.reward.kw_penalty = s.get<double>("kw_penalty", c.reward.kw_penalty);
    s.finish();
  }

  if (auto j = root.sub("data")) {
    Section s(*j, "data");
    c.data.entries_dir = resolve(s.get<std::string>("entries_dir", ""), base);
    c.data.pipeline.repair_retries = s.get<int>("repair_retries", c.data.pipeline.repair_retries);
    c.data.pipeline.literature_limit = non_negative(
        s.get<long long>("literature_limit", static_cast<long long>(c.data.pipeline.literature_limit)),
        "data.literature_limit");
    s.finish();
  }

  if (auto j = root.sub("bench")) {
    Section s(*j, "bench");
    c.bench_workers = non_negative(s.get<long long>("workers", 1), "bench.workers");
    s.finish();
  }
  root.finish();
  c.validate();
  return c;
}

void EngineConfig::validate() const {
  if (backend.mode == BackendMode::Scripted && !backend.url.empty())
    throw Error(ErrorCode::ConfigError, "backend.url is only valid with mode \"remote\"");
  if (backend.mode == BackendMode::Remote) {
    if (backend.url.empty()) throw Error(ErrorCode::ConfigError, "backend.url is required for mode \"remote\"");
    if (!backend.manifest.empty())
      throw Error(ErrorCode::ConfigError, "backend.manifest is only valid with mode \"scripted\"");
  }
  if (!(backend.timeout_s > 0)) throw Error(ErrorCode::ConfigError, "backend.timeout_s must be > 0");
  if (embedding.mode == EmbeddingMode::Sidecar && embedding.url.empty())
    throw Error(ErrorCode::ConfigError, "embedding.url is required for mode \"sidecar\"");
  if (embedding.mode == EmbeddingMode::Stub && !embedding.url.empty())
    throw Error(ErrorCode::ConfigError, "embedding.url is only valid with mode \"sidecar\"");
  retrieval.retriever.validate();
  if (retrieval.mode == RetrievalMode::Record && retrieval.cassette_dir.empty())
    throw Error(ErrorCode::ConfigError, "retriever.cassette_dir is required for mode \"record\"");
  if (retrieval.endpoints.retries < 0) throw Error(ErrorCode::ConfigError, "retriever.endpoints.retries must be >= 0");
  loop.validate();
  reward.validate();
  if (data.pipeline.repair_retries < 0) throw Error(ErrorCode::ConfigError, "data.repair_retries must be >= 0");
  if (bench_workers < 1) throw Error(ErrorCode::ConfigError, "bench.workers must be >= 1");
}

EngineConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path))
    throw Error(ErrorCode::ConfigError, "config file not found: " + path.string());
  json doc = json::parse(read_file(path), nullptr, false);
  if (doc.is_discarded()) throw Error(ErrorCode::ConfigError, "config file is not valid JSON: " + path.string());
  try {
    return config_from_json(doc, std::filesystem::absolute(path).parent_path());
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigError, path.string() + ": " + e.what());
  }
}

std::shared_ptr<Backend> make_backend(const BackendSection& s) {
  if (s.mode == BackendMode::Scripted) {
    if (s.manifest.empty()) throw Error(ErrorCode::ConfigError, "backend.manifest is required for mode \"scripted\"");
    if (!std::filesystem::is_regular_file(s.manifest))
      throw Error(ErrorCode::ConfigError, "manifest not found: " + s.manifest.string());
    return ScriptedBackend::from_file(s.manifest);
  }
  RemoteBackendConfig rc{s.url, "", s.timeout_s};
  if (!s.auth_env.empty()) {
    const char* token = std::getenv(s.auth_env.c_str());
    if (!token || !*token) throw Error(ErrorCode::ConfigError, "environment variable " + s.auth_env + " is not set");
    rc.auth_token = token;
  }
  return std::make_shared<RemoteBackend>(std::move(rc));
}

SourceSet make_sources(const RetrievalSection& s) {
  auto live_endpoints = [&] {
    auto ep = s.endpoints;
    if (!s.web_api_key_env.empty()) {
      const char* key = std::getenv(s.web_api_key_env.c_str());
      if (!key || !*key)
        throw Error(ErrorCode::ConfigError, "environment variable " + s.web_api_key_env + " is not set");
      ep.web_api_key = key;
    }
    return ep;
  };
  switch (s.mode) {
    case RetrievalMode::Replay:
      if (s.cassette_dir.empty()) throw Error(ErrorCode::ConfigError, "retriever.cassette_dir is required for replay");
      if (!std::filesystem::is_directory(s.cassette_dir))
        throw Error(ErrorCode::ConfigError, "cassette directory not found: " + s.cassette_dir.string());
      return make_replay_sources(s.cassette_dir);
    case RetrievalMode::Live:
      return make_live_sources(live_endpoints());
    case RetrievalMode::Record: {
      std::filesystem::create_directories(s.cassette_dir);
      SourceSet out;
      for (auto& [tool, client] : make_live_sources(live_endpoints()))
        out[tool] = std::make_shared<RecordingSource>(client, s.cassette_dir);
      return out;
    }
  }
  return {};
}

Engine build_engine(const EngineConfig& config, bool offline) {
  if (offline && config.backend.mode == BackendMode::Remote)
    throw Error(ErrorCode::ConfigError, "--offline cannot be combined with a remote backend");
  if (offline && config.retrieval.cassette_dir.empty())
    throw Error(ErrorCode::ConfigError, "--offline requires retriever.cassette_dir");
  return build_engine(config, make_backend(config.backend), offline);
}

Engine build_engine(const EngineConfig& config, std::shared_ptr<Backend> backend, bool offline) {
  config.validate();
  auto retrieval = config.retrieval;
  if (offline) {
    if (retrieval.cassette_dir.empty()) throw Error(ErrorCode::ConfigError, "--offline requires retriever.cassette_dir");
    retrieval.mode = RetrievalMode::Replay;
  }
  Engine e;
  e.backend = std::move(backend);
  e.gateway = std::make_unique<Gateway>(e.backend);
  if (offline || config.embedding.mode == EmbeddingMode::Stub)
    e.embedder = std::make_unique<StubEmbedder>();
  else
    e.embedder = std::make_unique<SidecarEmbedder>(SidecarConfig{config.embedding.url, config.embedding.timeout_s});
  e.retriever = std::make_unique<Retriever>(*e.gateway, *e.embedder, make_sources(retrieval), retrieval.retriever);
  e.controller = std::make_unique<RoundController>(*e.gateway, *e.retriever, config.loop);
  return e;
}

}  // namespace protrl
