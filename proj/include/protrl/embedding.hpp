#pragma once

#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "protrl/domain.hpp"

namespace protrl {

struct Embedding {
  std::vector<double> values;
  std::size_t dim = 0;
  std::string model_id;

  bool operator==(const Embedding&) const = default;
};

enum class EmbedKind { Text, Protein };
std::string_view to_string(EmbedKind kind);

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual Embedding embed_text(std::string_view text) = 0;
  virtual Embedding embed_protein(const ProteinSequence& seq) = 0;
};

inline constexpr std::size_t kStubDim = 64;
inline constexpr std::string_view kStubModelId = "stub-fnv1a-splitmix64-64";

/// The deterministic vector construction shared with the sidecar's
/// deterministic mode:
///   seed = FNV-1a-64("<kind>:<content>")            kind: "text" | "protein"
///   for i in 0..63: x += 0x9E3779B97F4A7C15, z = splitmix64-mix(x),
///                   v[i] = 2 * ((z >> 11) * 2^-53) - 1
///   return v / ||v||   (squares summed in index order)
std::vector<double> stub_vector(EmbedKind kind, std::string_view content);

/// Offline embedder: stub_vector for both kinds. Text content is used as is.
class StubEmbedder : public Embedder {
 public:
  Embedding embed_text(std::string_view text) override;
  Embedding embed_protein(const ProteinSequence& seq) override;
};

struct SidecarConfig {
  std::string url;  // base, e.g. http://127.0.0.1:8088
  double timeout_s = 30;
  std::size_t cache_capacity = 4096;
};

/// Client for POST <url>/v1/embed {"kind","content"} -> {"embedding","dim","model_id"}.
/// The first response of each kind pins that kind's dimension.
class SidecarEmbedder : public Embedder {
 public:
  explicit SidecarEmbedder(SidecarConfig config) : config_(std::move(config)) {}
  Embedding embed_text(std::string_view text) override;
  Embedding embed_protein(const ProteinSequence& seq) override;

  std::size_t upstream_calls() const;

 private:
  Embedding fetch(EmbedKind kind, std::string_view content);

  SidecarConfig config_;
  mutable std::mutex mu_;
  std::map<std::string, Embedding> cache_;
  std::map<EmbedKind, std::size_t> pinned_dim_;
  std::size_t upstream_calls_ = 0;
};

/// Standard cosine similarity, clamped to [-1, 1].
double cosine(const Embedding& a, const Embedding& b);

/// (cosine + 1) / 2, in [0, 1].
double vector_relevance(const Embedding& a, const Embedding& b);

}  // namespace protrl
