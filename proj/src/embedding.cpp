#include "protrl/embedding.hpp"

#include <algorithm>
#include <cmath>

#include "protrl/http.hpp"
#include "protrl/serialization.hpp"
#include "protrl/text.hpp"

namespace protrl {

std::string_view to_string(EmbedKind kind) { return kind == EmbedKind::Text ? "text" : "protein"; }

std::vector<double> stub_vector(EmbedKind kind, std::string_view content) {
  std::string input(to_string(kind));
  input += ':';
  input += content;
  std::uint64_t x = text::fnv1a64(input);
  std::vector<double> v(kStubDim);
  for (auto& out : v) {
    x += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    z ^= z >> 31;
    const double u = static_cast<double>(z >> 11) * 0x1.0p-53;
    out = 2.0 * u - 1.0;
  }
  double sq = 0;
  for (double c : v) sq += c * c;
  const double norm = std::sqrt(sq);
  for (auto& c : v) c /= norm;
  return v;
}

Embedding StubEmbedder::embed_text(std::string_view text) {
  if (text.empty()) throw Error(ErrorCode::InvalidArgument, "cannot embed empty text");
  return {stub_vector(EmbedKind::Text, text), kStubDim, std::string(kStubModelId)};
}

Embedding StubEmbedder::embed_protein(const ProteinSequence& seq) {
  return {stub_vector(EmbedKind::Protein, seq.residues()), kStubDim, std::string(kStubModelId)};
}

Embedding SidecarEmbedder::embed_text(std::string_view text) {
  if (text.empty()) throw Error(ErrorCode::InvalidArgument, "cannot embed empty text");
  return fetch(EmbedKind::Text, text);
}

Embedding SidecarEmbedder::embed_protein(const ProteinSequence& seq) {
  return fetch(EmbedKind::Protein, seq.residues());
}

std::size_t SidecarEmbedder::upstream_calls() const {
  std::lock_guard lock(mu_);
  return upstream_calls_;
}

Embedding SidecarEmbedder::fetch(EmbedKind kind, std::string_view content) {
  const auto key = std::string(to_string(kind)) + ":" + std::string(content);
  {
    std::lock_guard lock(mu_);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    ++upstream_calls_;
  }

  json body = {{"kind", to_string(kind)}, {"content", content}};
  auto res = http::post(config_.url + "/v1/embed", body.dump(), "application/json", {}, config_.timeout_s);
  if (res.status == 0) throw Error(ErrorCode::SidecarUnreachable, config_.url + ": " + res.error);
  if (res.status == 413) throw Error(ErrorCode::SequenceTooLongForModel, "sidecar rejected length " + std::to_string(content.size()));
  if (res.status == 400) throw Error(ErrorCode::InvalidArgument, "sidecar rejected input: " + res.body);
  if (!res.ok()) throw Error(ErrorCode::SidecarUnreachable, "sidecar HTTP " + std::to_string(res.status));

  json j = json::parse(res.body, nullptr, false);
  if (j.is_discarded() || !j.contains("embedding") || !j["embedding"].is_array())
    throw Error(ErrorCode::SidecarUnreachable, "sidecar response lacks an embedding array");
  Embedding e;
  try {
    e.values = j["embedding"].get<std::vector<double>>();
    e.dim = j.value("dim", e.values.size());
    e.model_id = j.value("model_id", "");
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::SidecarUnreachable, std::string("sidecar response: ") + ex.what());
  }
  if (e.values.size() != e.dim)
    throw Error(ErrorCode::DimensionMismatch, "declared dim " + std::to_string(e.dim) + ", got " +
                                                  std::to_string(e.values.size()));
  if (!std::all_of(e.values.begin(), e.values.end(), [](double c) { return std::isfinite(c); }))
    throw Error(ErrorCode::SidecarUnreachable, "sidecar returned non-finite values");
  // Racing identical requests may both reach the sidecar; the first
  // insert wins and every caller sees that value.
  std::lock_guard lock(mu_);
  auto [pin, fresh] = pinned_dim_.emplace(kind, e.dim);
  if (!fresh && pin->second != e.dim)
    throw Error(ErrorCode::DimensionMismatch, "expected dim " + std::to_string(pin->second) + ", got " +
                                                  std::to_string(e.dim));
  if (cache_.size() >= config_.cache_capacity) cache_.clear();
  return cache_.emplace(key, std::move(e)).first->second;
}

double cosine(const Embedding& a, const Embedding& b) {
  if (a.values.size() != b.values.size())
    throw Error(ErrorCode::DimensionMismatch, std::to_string(a.values.size()) + " vs " +
                                                  std::to_string(b.values.size()));
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    dot += a.values[i] * b.values[i];
    na += a.values[i] * a.values[i];
    nb += b.values[i] * b.values[i];
  }
  if (na == 0 || nb == 0) throw Error(ErrorCode::ZeroVector, "cosine of a zero vector");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

double vector_relevance(const Embedding& a, const Embedding& b) {
  return std::clamp((cosine(a, b) + 1.0) / 2.0, 0.0, 1.0);
}

}  // namespace protrl
