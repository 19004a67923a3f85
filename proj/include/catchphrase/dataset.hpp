#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "catchphrase/embedding.hpp"
#include "catchphrase/error.hpp"

namespace catchphrase {

/// Mining channel a prompt came from. `kTemplate` marks the plain
/// "a sound of a <label>" style prompt used by the baseline; it is never part
/// of the enriched pool.
enum class PromptSource { kLlmVisual, kLlmAuditory, kLlmSemantic, kAcm, kTemplate };

constexpr std::string_view to_string(PromptSource source) {
  switch (source) {
    case PromptSource::kLlmVisual: return "llm_visual";
    case PromptSource::kLlmAuditory: return "llm_auditory";
    case PromptSource::kLlmSemantic: return "llm_semantic";
    case PromptSource::kAcm: return "acm";
    case PromptSource::kTemplate: return "template";
  }
  return "unknown";
}

inline PromptSource parse_prompt_source(std::string_view name) {
  for (auto s : {PromptSource::kLlmVisual, PromptSource::kLlmAuditory, PromptSource::kLlmSemantic,
                 PromptSource::kAcm, PromptSource::kTemplate}) {
    if (to_string(s) == name) return s;
  }
  fail(ErrorCode::kCorruptManifest, "unknown prompt source '" + std::string(name) + "'");
}

inline bool is_enriched(PromptSource source) { return source != PromptSource::kTemplate; }

struct AudioRecord {
  std::string id;
  std::string class_label;
  EmbeddingVector selector_emb;  // r^a
  EmbeddingVector encoder_emb;   // f^a
  // Known correct prompt id, present for synthetic benchmarks only.
  std::optional<std::string> truth_prompt_id;

  friend bool operator==(const AudioRecord&, const AudioRecord&) = default;
};

struct PromptRecord {
  std::string id;
  std::string class_label;
  PromptSource source = PromptSource::kLlmVisual;
  std::string text;
  EmbeddingVector selector_emb;  // r^p
  EmbeddingVector target_emb;    // f^t

  friend bool operator==(const PromptRecord&, const PromptRecord&) = default;
};

struct EncoderNames {
  std::string selector;
  std::string audio;
  std::string text;

  friend bool operator==(const EncoderNames&, const EncoderNames&) = default;
};

struct Manifest {
  static constexpr int kCurrentVersion = 1;

  int version = kCurrentVersion;
  std::size_t dim_selector = 0;
  std::size_t dim_encoder_audio = 0;
  std::size_t dim_encoder_text = 0;
  EncoderNames encoder_names;
  // Classes declared without necessarily having prompts.
  std::vector<std::string> classes;

  friend bool operator==(const Manifest&, const Manifest&) = default;
};

struct Dataset {
  Manifest manifest;
  std::vector<AudioRecord> audio;
  std::vector<PromptRecord> prompts;

  friend bool operator==(const Dataset&, const Dataset&) = default;

  /// Sorted union of declared classes and audio classes.
  std::vector<std::string> audio_classes() const {
    std::set<std::string> out(manifest.classes.begin(), manifest.classes.end());
    for (const auto& a : audio) out.insert(a.class_label);
    return {out.begin(), out.end()};
  }

  const PromptRecord* find_prompt(std::string_view id) const {
    for (const auto& p : prompts)
      if (p.id == id) return &p;
    return nullptr;
  }

  const AudioRecord* find_audio(std::string_view id) const {
    for (const auto& a : audio)
      if (a.id == id) return &a;
    return nullptr;
  }
};

inline void check_dims(const Manifest& m) {
  if (m.dim_selector == 0 || m.dim_encoder_audio == 0 || m.dim_encoder_text == 0) {
    fail(ErrorCode::kCorruptManifest, "manifest dims must all be >= 1");
  }
  if (m.version != Manifest::kCurrentVersion) {
    fail(ErrorCode::kCorruptManifest, "unsupported manifest version " + std::to_string(m.version));
  }
}

/// Checks every Dataset invariant. `require_embeddings` = false admits staged
/// prompts whose embeddings are still absent.
inline void validate(const Dataset& ds, bool require_embeddings = true) {
  const auto& m = ds.manifest;
  check_dims(m);
  std::unordered_set<std::string> ids;
  auto check_dim = [&](const EmbeddingVector& v, std::size_t want, const std::string& what) {
    if (v.empty()) {
      if (require_embeddings) fail(ErrorCode::kMissingEmbedding, what + " has no embedding");
      return;
    }
    if (v.dim() != want) {
      fail(ErrorCode::kDimMismatch, what + ": dim " + std::to_string(v.dim()) + ", manifest says " +
                                        std::to_string(want));
    }
  };
  for (const auto& a : ds.audio) {
    if (!ids.insert(a.id).second) fail(ErrorCode::kCorruptManifest, "duplicate id '" + a.id + "'");
    if (a.class_label.empty()) fail(ErrorCode::kCorruptManifest, "audio '" + a.id + "' has no class");
    check_dim(a.selector_emb, m.dim_selector, "audio '" + a.id + "' selector");
    check_dim(a.encoder_emb, m.dim_encoder_audio, "audio '" + a.id + "' encoder");
  }
  for (const auto& p : ds.prompts) {
    if (!ids.insert(p.id).second) fail(ErrorCode::kCorruptManifest, "duplicate id '" + p.id + "'");
    if (p.class_label.empty()) fail(ErrorCode::kCorruptManifest, "prompt '" + p.id + "' has no class");
    check_dim(p.selector_emb, m.dim_selector, "prompt '" + p.id + "' selector");
    check_dim(p.target_emb, m.dim_encoder_text, "prompt '" + p.id + "' target");
  }
  auto known = ds.audio_classes();
  std::set<std::string> known_set(known.begin(), known.end());
  for (const auto& p : ds.prompts) {
    if (!known_set.contains(p.class_label)) {
      fail(ErrorCode::kCorruptManifest,
           "prompt '" + p.id + "' has undeclared class '" + p.class_label + "'");
    }
  }
}

}  // namespace catchphrase
