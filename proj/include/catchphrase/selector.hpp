#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "catchphrase/dataset.hpp"
#include "catchphrase/embedding.hpp"
#include "catchphrase/error.hpp"
#include "catchphrase/log.hpp"
#include "catchphrase/promptmine.hpp"
#include "catchphrase/rng.hpp"

namespace catchphrase {

struct SelectorConfig {
  std::size_t n_as = 10;   // audio clips sampled per class
  std::size_t top_k = 10;  // prompts kept per class
  std::uint64_t seed = 0;
  bool use_negative_term = true;

  void validate() const {
    if (n_as < 1) fail(ErrorCode::kInvalidConfig, "selector.n_as must be >= 1");
    if (top_k < 1) fail(ErrorCode::kInvalidConfig, "selector.top_k must be >= 1");
  }
};

/// Row i = sampled audio i, column j = pool prompt j.
struct FilterScores {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> matrix;  // row-major rows x cols
  std::vector<double> per_prompt;
  std::vector<std::string> row_classes;

  double at(std::size_t i, std::size_t j) const { return matrix[i * cols + j]; }
};

struct ScoredPrompt {
  PromptRecord prompt;
  std::size_t pool_index = 0;
  double score = 0.0;
};

struct FilteredPool {
  std::map<std::string, std::vector<ScoredPrompt>> per_class;

  const std::vector<ScoredPrompt>* bucket(const std::string& label) const {
    auto it = per_class.find(label);
    return it == per_class.end() ? nullptr : &it->second;
  }
};

struct Retrieval {
  PromptRecord prompt;
  std::size_t bucket_index = 0;
  double score = 0.0;
};

struct Assignment {
  std::string audio_id;
  std::string prompt_id;
  double score = 0.0;

  friend bool operator==(const Assignment&, const Assignment&) = default;
};

inline constexpr std::uint64_t kSubsetStream = 0x5eedc1a55ULL;

/// Draws min(n_as, available) clips per class, uniformly without replacement.
/// Classes are visited in sorted order; within a class the draw order is kept.
inline std::vector<AudioRecord> sample_audio_subset(const Dataset& ds, const SelectorConfig& config) {
  config.validate();
  std::map<std::string, std::vector<std::size_t>> by_class;
  for (const auto& c : ds.audio_classes()) by_class[c];
  for (std::size_t i = 0; i < ds.audio.size(); ++i) by_class[ds.audio[i].class_label].push_back(i);

  Pcg32 rng(config.seed, kSubsetStream);
  std::vector<AudioRecord> subset;
  for (const auto& [label, members] : by_class) {
    if (members.empty()) fail(ErrorCode::kEmptyClass, "class '" + label + "' has no audio");
    for (auto k : sample_without_replacement(rng, members.size(), config.n_as)) {
      subset.push_back(ds.audio[members[k]]);
    }
  }
  return subset;
}

/// Relevance of every pool prompt against the sampled audio:
/// same-class pairs add sim(r^a, r^p), different-class pairs add 1 - sim
/// (or 0 when the cross-class term is disabled). Column sums accumulate in
/// ascending row order.
inline FilterScores score_filter(std::span<const AudioRecord> subset, const PromptPool& pool,
                                 const SelectorConfig& config) {
  FilterScores s;
  s.rows = subset.size();
  s.cols = pool.prompts.size();
  s.matrix.assign(s.rows * s.cols, 0.0);
  s.per_prompt.assign(s.cols, 0.0);
  s.row_classes.reserve(s.rows);
  for (const auto& a : subset) s.row_classes.push_back(a.class_label);

  for (std::size_t i = 0; i < s.rows; ++i) {
    const auto& audio = subset[i];
    for (std::size_t j = 0; j < s.cols; ++j) {
      const auto& prompt = pool.prompts[j];
      double value;
      if (audio.class_label == prompt.class_label) {
        value = cosine_sim(audio.selector_emb, prompt.selector_emb);
      } else if (config.use_negative_term) {
        value = 1.0 - cosine_sim(audio.selector_emb, prompt.selector_emb);
      } else {
        value = 0.0;
      }
      s.matrix[i * s.cols + j] = value;
    }
  }
  for (std::size_t i = 0; i < s.rows; ++i) {
    for (std::size_t j = 0; j < s.cols; ++j) s.per_prompt[j] += s.matrix[i * s.cols + j];
  }
  return s;
}

/// Keeps the K best-scoring prompts of every sampled class (ties: lower pool
/// index first). Prompts of classes with no sampled audio are dropped.
inline FilteredPool filter_topk(const FilterScores& scores, const PromptPool& pool,
                                const SelectorConfig& config) {
  config.validate();
  if (scores.cols != pool.prompts.size()) {
    fail(ErrorCode::kDimensionMismatch, "filter scores do not cover the pool");
  }
  std::set<std::string> sampled(scores.row_classes.begin(), scores.row_classes.end());
  FilteredPool out;
  for (const auto& [label, indices] : pool.per_class_index) {
    if (!sampled.contains(label)) {
      logger()->warn("dropping {} prompt(s) of class '{}': no audio of that class was sampled",
                     indices.size(), label);
      continue;
    }
    std::vector<std::size_t> order(indices.begin(), indices.end());
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (scores.per_prompt[a] != scores.per_prompt[b]) {
        return scores.per_prompt[a] > scores.per_prompt[b];
      }
      return a < b;
    });
    order.resize(std::min(order.size(), config.top_k));
    auto& bucket = out.per_class[label];
    for (auto idx : order) bucket.push_back({pool.prompts[idx], idx, scores.per_prompt[idx]});
  }
  return out;
}

/// Every prompt of the pool bucketed by class, unscored. Used when retrieval
/// runs without filtering.
inline FilteredPool bucket_all(const PromptPool& pool) {
  FilteredPool out;
  for (const auto& [label, indices] : pool.per_class_index) {
    auto& bucket = out.per_class[label];
    for (auto idx : indices) bucket.push_back({pool.prompts[idx], idx, 0.0});
  }
  return out;
}

/// Top-1 prompt of the audio's class bucket by selector-space cosine
/// similarity; ties go to the earlier bucket entry.
inline Retrieval retrieve_top1(const AudioRecord& audio, const FilteredPool& filtered) {
  const auto* bucket = filtered.bucket(audio.class_label);
  if (bucket == nullptr || bucket->empty()) {
    fail(ErrorCode::kEmptyFilteredClass, "no filtered prompts for class '" + audio.class_label + "'");
  }
  std::size_t best = 0;
  double best_score = cosine_sim(audio.selector_emb, (*bucket)[0].prompt.selector_emb);
  for (std::size_t i = 1; i < bucket->size(); ++i) {
    double s = cosine_sim(audio.selector_emb, (*bucket)[i].prompt.selector_emb);
    if (s > best_score) {
      best = i;
      best_score = s;
    }
  }
  return {(*bucket)[best].prompt, best, best_score};
}

inline std::vector<Assignment> retrieve_all(std::span<const AudioRecord> audio,
                                            const FilteredPool& filtered) {
  std::vector<Assignment> out;
  out.reserve(audio.size());
  for (const auto& a : audio) {
    auto r = retrieve_top1(a, filtered);
    out.push_back({a.id, r.prompt.id, r.score});
  }
  return out;
}

/// Runs sampling, scoring and top-K selection over the dataset's enriched pool.
inline FilteredPool run_filter(const Dataset& ds, const PromptPool& pool, const SelectorConfig& config) {
  auto subset = sample_audio_subset(ds, config);
  auto scores = score_filter(subset, pool, config);
  return filter_topk(scores, pool, config);
}

// --- serialization -----------------------------------------------------------

/// {class: [{prompt_id, score}]}
inline nlohmann::json to_json(const FilteredPool& filtered) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [label, bucket] : filtered.per_class) {
    auto arr = nlohmann::json::array();
    for (const auto& e : bucket) arr.push_back({{"prompt_id", e.prompt.id}, {"score", e.score}});
    out[label] = std::move(arr);
  }
  return out;
}

/// Rebuilds a FilteredPool from its JSON form, resolving ids against `pool`.
inline FilteredPool filtered_pool_from_json(const nlohmann::json& j, const PromptPool& pool) {
  if (!j.is_object()) fail(ErrorCode::kCorruptManifest, "filtered pool must be a JSON object");
  std::map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < pool.prompts.size(); ++i) by_id[pool.prompts[i].id] = i;
  FilteredPool out;
  for (const auto& [label, arr] : j.items()) {
    auto& bucket = out.per_class[label];
    for (const auto& e : arr) {
      if (!e.is_object() || !e.contains("prompt_id") || !e.contains("score")) {
        fail(ErrorCode::kCorruptManifest, "filtered pool entry needs prompt_id and score");
      }
      auto id = e["prompt_id"].get<std::string>();
      auto it = by_id.find(id);
      if (it == by_id.end()) fail(ErrorCode::kIdMismatch, "unknown prompt id '" + id + "'");
      const auto& prompt = pool.prompts[it->second];
      if (prompt.class_label != label) {
        fail(ErrorCode::kClassMismatch, "prompt '" + id + "' filed under class '" + label + "'");
      }
      bucket.push_back({prompt, it->second, e["score"].get<double>()});
    }
  }
  return out;
}

/// One JSON object per line: {audio_id, prompt_id, score}.
inline std::string to_jsonl(std::span<const Assignment> assignments) {
  std::ostringstream out;
  for (const auto& a : assignments) {
    out << nlohmann::json{{"audio_id", a.audio_id}, {"prompt_id", a.prompt_id}, {"score", a.score}}.dump()
        << '\n';
  }
  return out.str();
}

inline std::vector<Assignment> assignments_from_jsonl(std::istream& in) {
  std::vector<Assignment> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      out.push_back({j.at("audio_id").get<std::string>(), j.at("prompt_id").get<std::string>(),
                     j.value("score", 0.0)});
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::kCorruptManifest, "assignments line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace catchphrase
