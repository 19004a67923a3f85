#pragma once

#include <array>
#include <cctype>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>
#include <unicode/normalizer2.h>
#include <unicode/unistr.h>

#include "catchphrase/dataset.hpp"
#include "catchphrase/error.hpp"

namespace catchphrase {

enum class ArticleMode { kLiteral, kHeuristic };

struct QuerySet {
  std::string class_label;
  std::array<std::string, 3> visual;
  std::array<std::string, 3> auditory;
  std::array<std::string, 3> semantic;

  friend bool operator==(const QuerySet&, const QuerySet&) = default;
};

namespace mine_detail {

// "{}" is the class slot; "a(n)" is the article slot.
inline constexpr std::array<std::string_view, 3> kVisual = {
    "Describe what a(n) {} looks like in real world.",
    "What does a(n) {} looks like in real world?",
    "Describe an image from the internet of a(n) {} looks in real world.",
};
inline constexpr std::array<std::string_view, 3> kAuditory = {
    "Describe what a(n) {} sounds like in real world.",
    "What does a(n) {} sound like in real world?",
    "Describe a sound from the internet of a(n) {} in real world.",
};
inline constexpr std::array<std::string_view, 3> kSemantic = {
    "Create one sentence about meaning of a(n) {} in real world:",
    "Summarize a(n) {} in a single sentence.",
    "Describe what a(n) {} represents in a real-world context in one sentence.",
};

inline std::string instantiate(std::string_view tmpl, const std::string& label, ArticleMode mode) {
  std::string out(tmpl);
  if (mode == ArticleMode::kHeuristic) {
    auto first = static_cast<char>(std::tolower(static_cast<unsigned char>(label.front())));
    bool vowel = std::string_view("aeiou").find(first) != std::string_view::npos;
    auto pos = out.find("a(n)");
    if (pos != std::string::npos) out.replace(pos, 4, vowel ? "an" : "a");
  }
  auto slot = out.find("{}");
  out.replace(slot, 2, label);
  return out;
}

inline std::array<std::string, 3> fill(const std::array<std::string_view, 3>& templates,
                                       const std::string& label, ArticleMode mode) {
  return {instantiate(templates[0], label, mode), instantiate(templates[1], label, mode),
          instantiate(templates[2], label, mode)};
}

}  // namespace mine_detail

/// Instantiates the nine visual/auditory/semantic LLM queries for a class.
inline QuerySet expand_queries(const std::string& class_label,
                               ArticleMode mode = ArticleMode::kLiteral) {
  if (class_label.empty()) fail(ErrorCode::kEmptyLabel, "class label is empty");
  return {class_label, mine_detail::fill(mine_detail::kVisual, class_label, mode),
          mine_detail::fill(mine_detail::kAuditory, class_label, mode),
          mine_detail::fill(mine_detail::kSemantic, class_label, mode)};
}

/// Query manifest consumed by the prompt-generation bridge:
/// {class: {"visual": [3], "auditory": [3], "semantic": [3]}}.
inline nlohmann::json query_manifest(std::span<const std::string> classes,
                                     ArticleMode mode = ArticleMode::kLiteral) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& c : classes) {
    auto q = expand_queries(c, mode);
    out[c] = {{"visual", q.visual}, {"auditory", q.auditory}, {"semantic", q.semantic}};
  }
  return out;
}

/// NFC-normalizes and trims surrounding whitespace.
inline std::string canonical_text(std::string_view text) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) fail(ErrorCode::kInvalidConfig, "ICU NFC normalizer unavailable");
  auto source = icu::UnicodeString::fromUTF8(icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  icu::UnicodeString normalized = nfc->normalize(source, status);
  if (U_FAILURE(status)) fail(ErrorCode::kInvalidConfig, "NFC normalization failed");
  normalized.trim();
  std::string out;
  normalized.toUTF8String(out);
  return out;
}

struct PromptPool {
  std::vector<PromptRecord> prompts;
  std::map<std::string, std::vector<std::size_t>> per_class_index;

  std::span<const std::size_t> class_indices(const std::string& label) const {
    auto it = per_class_index.find(label);
    if (it == per_class_index.end()) return {};
    return it->second;
  }
};

/// Merges class-level (LLM) and instance-level (ACM) prompts into one pool.
/// Exact duplicates of (class, text, source), compared after NFC + trim, are
/// dropped; the first occurrence survives in its original position.
inline PromptPool assemble_pool(std::span<const PromptRecord> class_prompts,
                                std::span<const PromptRecord> instance_prompts) {
  PromptPool pool;
  std::set<std::tuple<std::string, std::string, PromptSource>> seen;
  auto take = [&](const PromptRecord& p) {
    if (p.selector_emb.empty()) {
      fail(ErrorCode::kMissingEmbedding, "prompt '" + p.id + "' has no selector embedding");
    }
    auto key = std::make_tuple(canonical_text(p.class_label), canonical_text(p.text), p.source);
    if (!seen.insert(std::move(key)).second) return;
    pool.per_class_index[p.class_label].push_back(pool.prompts.size());
    pool.prompts.push_back(p);
  };
  for (const auto& p : class_prompts) take(p);
  for (const auto& p : instance_prompts) take(p);
  return pool;
}

/// The enriched pool of a dataset: every non-template prompt, LLM channels
/// first, then ACM captions.
inline PromptPool exprompt_pool(const Dataset& ds) {
  std::vector<PromptRecord> llm;
  std::vector<PromptRecord> acm;
  for (const auto& p : ds.prompts) {
    if (p.source == PromptSource::kAcm) {
      acm.push_back(p);
    } else if (is_enriched(p.source)) {
      llm.push_back(p);
    }
  }
  return assemble_pool(llm, acm);
}

}  // namespace catchphrase
