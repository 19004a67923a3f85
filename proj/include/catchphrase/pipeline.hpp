#pragma once

// Pipeline configuration: one JSON document holding paths and every stage's
// settings. Defaults come from the library structs; a user file and
// `key=value` overrides are merged on top and may only name existing keys.

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "catchphrase/error.hpp"
#include "catchphrase/evalbench.hpp"
#include "catchphrase/mapnet.hpp"
#include "catchphrase/promptmine.hpp"
#include "catchphrase/selector.hpp"
#include "catchphrase/trainer.hpp"

namespace catchphrase {

using json = nlohmann::json;

struct PipelinePaths {
  std::string archive = "archive";
  std::string queries = "queries.json";
  std::string ingested_archive = "archive.mined";
  std::string filtered = "filtered.json";
  std::string assignments = "assignments.jsonl";
  std::string checkpoint = "model.ckpt";
  std::string checkpoint_dir = "checkpoints";
  std::string losses = "losses.csv";
  std::string train_metrics = "train_metrics.json";
  std::string metrics = "metrics.json";
  std::string ablation_json = "ablation.json";
  std::string ablation_table = "ablation.txt";
};

struct MineConfig {
  // Classes for the query manifest; empty means the archive's classes.
  std::vector<std::string> classes;
  ArticleMode article = ArticleMode::kLiteral;
};

struct AblationRunConfig {
  std::uint64_t seed = 1;
  std::size_t n_seeds = 5;
  AblationConfig base = default_ablation_config(1);
};

struct PipelineConfig {
  std::string log_level = "info";
  PipelinePaths paths;
  MineConfig mine;
  SelectorConfig selector;
  TrainConfig train;
  SynthConfig synth;
  AblationRunConfig ablation;
};

// --- to JSON -----------------------------------------------------------------

inline json to_json(const SelectorConfig& c) {
  return {{"n_as", c.n_as}, {"top_k", c.top_k}, {"seed", c.seed}, {"use_negative_term", c.use_negative_term}};
}

inline json to_json(const TrainConfig& c) {
  return {{"weights", {{"mse", c.weights.mse}, {"rec", c.weights.rec}, {"adv", c.weights.adv},
                       {"infonce", c.weights.infonce}}},
          {"lr", c.lr},
          {"batch_size", c.batch_size},
          {"steps", c.steps},
          {"tau", c.tau},
          {"m_neg", c.m_neg},
          {"seed", c.seed},
          {"optimizer", std::string(to_string(c.optimizer))},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"adam_eps", c.adam_eps},
          {"d_steps_per_g_step", c.d_steps_per_g_step},
          {"non_saturating", c.non_saturating},
          {"normalize_features", c.normalize_features},
          {"hidden", c.hidden},
          {"hidden_activation", std::string(to_string(c.hidden_activation))}};
}

inline json to_json(const SynthConfig& c) {
  json pairs = json::array();
  for (auto [a, b] : c.homograph_pairs) pairs.push_back({a, b});
  return {{"n_classes", c.n_classes},
          {"audio_per_class", c.audio_per_class},
          {"prompts_per_class", c.prompts_per_class},
          {"dim_selector", c.dim_selector},
          {"dim_encoder_audio", c.dim_encoder_audio},
          {"dim_encoder_text", c.dim_encoder_text},
          {"noise_sigma", c.noise_sigma},
          {"homograph_pairs", pairs},
          {"illusion_rate", c.illusion_rate},
          {"distractor_prompts_per_class", c.distractor_prompts_per_class},
          {"ambiguous_prompts_per_class", c.ambiguous_prompts_per_class},
          {"ambiguity_mix", c.ambiguity_mix},
          {"subtype_scale", c.subtype_scale},
          {"seed", c.seed}};
}

inline json to_json(const PipelineConfig& c) {
  const auto& p = c.paths;
  return {{"log_level", c.log_level},
          {"paths", {{"archive", p.archive},
                     {"queries", p.queries},
                     {"ingested_archive", p.ingested_archive},
                     {"filtered", p.filtered},
                     {"assignments", p.assignments},
                     {"checkpoint", p.checkpoint},
                     {"checkpoint_dir", p.checkpoint_dir},
                     {"losses", p.losses},
                     {"train_metrics", p.train_metrics},
                     {"metrics", p.metrics},
                     {"ablation_json", p.ablation_json},
                     {"ablation_table", p.ablation_table}}},
          {"mine", {{"classes", c.mine.classes},
                    {"article", c.mine.article == ArticleMode::kLiteral ? "literal" : "heuristic"}}},
          {"selector", to_json(c.selector)},
          {"train", to_json(c.train)},
          {"synth", to_json(c.synth)},
          {"ablation", {{"seed", c.ablation.seed},
                        {"n_seeds", c.ablation.n_seeds},
                        {"test_every", c.ablation.base.test_every},
                        {"selector", to_json(c.ablation.base.selector)},
                        {"train", to_json(c.ablation.base.train)}}}};
}

// --- from JSON ---------------------------------------------------------------

namespace config_detail {

template <typename T>
T get(const json& j, const char* key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorCode::kInvalidConfig, where + "." + key + ": " + e.what());
  }
}

}  // namespace config_detail

inline SelectorConfig selector_from_json(const json& j, const std::string& where) {
  using config_detail::get;
  SelectorConfig c;
  c.n_as = get<std::size_t>(j, "n_as", where);
  c.top_k = get<std::size_t>(j, "top_k", where);
  c.seed = get<std::uint64_t>(j, "seed", where);
  c.use_negative_term = get<bool>(j, "use_negative_term", where);
  c.validate();
  return c;
}

inline TrainConfig train_from_json(const json& j, const std::string& where) {
  using config_detail::get;
  TrainConfig c;
  const auto& w = j.at("weights");
  c.weights = {get<double>(w, "mse", where + ".weights"), get<double>(w, "rec", where + ".weights"),
               get<double>(w, "adv", where + ".weights"), get<double>(w, "infonce", where + ".weights")};
  c.lr = get<double>(j, "lr", where);
  c.batch_size = get<std::size_t>(j, "batch_size", where);
  c.steps = get<std::size_t>(j, "steps", where);
  c.tau = get<double>(j, "tau", where);
  c.m_neg = get<std::size_t>(j, "m_neg", where);
  c.seed = get<std::uint64_t>(j, "seed", where);
  c.optimizer = parse_optimizer(get<std::string>(j, "optimizer", where));
  c.beta1 = get<double>(j, "beta1", where);
  c.beta2 = get<double>(j, "beta2", where);
  c.adam_eps = get<double>(j, "adam_eps", where);
  c.d_steps_per_g_step = get<std::size_t>(j, "d_steps_per_g_step", where);
  c.non_saturating = get<bool>(j, "non_saturating", where);
  c.normalize_features = get<bool>(j, "normalize_features", where);
  c.hidden = get<std::vector<std::size_t>>(j, "hidden", where);
  c.hidden_activation = parse_activation(get<std::string>(j, "hidden_activation", where));
  c.validate();
  return c;
}

inline SynthConfig synth_from_json(const json& j, const std::string& where) {
  using config_detail::get;
  SynthConfig c;
  c.n_classes = get<std::size_t>(j, "n_classes", where);
  c.audio_per_class = get<std::size_t>(j, "audio_per_class", where);
  c.prompts_per_class = get<std::size_t>(j, "prompts_per_class", where);
  c.dim_selector = get<std::size_t>(j, "dim_selector", where);
  c.dim_encoder_audio = get<std::size_t>(j, "dim_encoder_audio", where);
  c.dim_encoder_text = get<std::size_t>(j, "dim_encoder_text", where);
  c.noise_sigma = get<double>(j, "noise_sigma", where);
  c.homograph_pairs.clear();
  for (const auto& p : get<std::vector<std::vector<std::size_t>>>(j, "homograph_pairs", where)) {
    if (p.size() != 2) fail(ErrorCode::kInvalidConfig, where + ".homograph_pairs entries must be [a, b]");
    c.homograph_pairs.emplace_back(p[0], p[1]);
  }
  c.illusion_rate = get<double>(j, "illusion_rate", where);
  c.distractor_prompts_per_class = get<std::size_t>(j, "distractor_prompts_per_class", where);
  c.ambiguous_prompts_per_class = get<std::size_t>(j, "ambiguous_prompts_per_class", where);
  c.ambiguity_mix = get<double>(j, "ambiguity_mix", where);
  c.subtype_scale = get<double>(j, "subtype_scale", where);
  c.seed = get<std::uint64_t>(j, "seed", where);
  c.validate();
  return c;
}

inline PipelineConfig pipeline_from_json(const json& j) {
  using config_detail::get;
  PipelineConfig c;
  c.log_level = get<std::string>(j, "log_level", "config");
  const auto& p = j.at("paths");
  auto path = [&](const char* key) { return get<std::string>(p, key, "paths"); };
  c.paths = {path("archive"),     path("queries"),        path("ingested_archive"), path("filtered"),
             path("assignments"), path("checkpoint"),     path("checkpoint_dir"),   path("losses"),
             path("train_metrics"), path("metrics"),      path("ablation_json"),    path("ablation_table")};
  const auto& m = j.at("mine");
  c.mine.classes = get<std::vector<std::string>>(m, "classes", "mine");
  auto article = get<std::string>(m, "article", "mine");
  if (article == "literal") {
    c.mine.article = ArticleMode::kLiteral;
  } else if (article == "heuristic") {
    c.mine.article = ArticleMode::kHeuristic;
  } else {
    fail(ErrorCode::kInvalidConfig, "mine.article must be literal or heuristic");
  }
  c.selector = selector_from_json(j.at("selector"), "selector");
  c.train = train_from_json(j.at("train"), "train");
  c.synth = synth_from_json(j.at("synth"), "synth");
  const auto& a = j.at("ablation");
  c.ablation.seed = get<std::uint64_t>(a, "seed", "ablation");
  c.ablation.n_seeds = get<std::size_t>(a, "n_seeds", "ablation");
  if (c.ablation.n_seeds < 1) fail(ErrorCode::kInvalidConfig, "ablation.n_seeds must be >= 1");
  c.ablation.base.test_every = get<std::size_t>(a, "test_every", "ablation");
  if (c.ablation.base.test_every < 2) fail(ErrorCode::kInvalidConfig, "ablation.test_every must be >= 2");
  c.ablation.base.selector = selector_from_json(a.at("selector"), "ablation.selector");
  c.ablation.base.train = train_from_json(a.at("train"), "ablation.train");
  return c;
}

// --- merging -----------------------------------------------------------------

/// Recursively overwrites `base` with `patch`. Objects merge key by key; any
/// other value replaces. Keys absent from `base` are rejected.
inline void merge_strict(json& base, const json& patch, const std::string& where = "") {
  if (!patch.is_object()) fail(ErrorCode::kInvalidConfig, "config" + where + " must be a JSON object");
  for (const auto& [key, value] : patch.items()) {
    auto path = where.empty() ? key : where + "." + key;
    if (!base.contains(key)) fail(ErrorCode::kInvalidConfig, "unknown config key '" + path + "'");
    auto& slot = base[key];
    if (slot.is_object()) {
      merge_strict(slot, value, path);
    } else {
      slot = value;
    }
  }
}

/// `a.b.c=value`; the value is parsed as JSON when it parses, else taken as a string.
inline void apply_override(json& config, std::string_view assignment) {
  auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    fail(ErrorCode::kInvalidConfig, "override must look like key=value: '" + std::string(assignment) + "'");
  }
  std::string key(assignment.substr(0, eq));
  std::string raw(assignment.substr(eq + 1));
  json value = json::parse(raw, nullptr, /*allow_exceptions=*/false);
  if (value.is_discarded()) value = raw;

  json* node = &config;
  std::size_t start = 0;
  while (true) {
    auto dot = key.find('.', start);
    auto part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(part)) {
      fail(ErrorCode::kInvalidConfig, "unknown config key '" + key + "'");
    }
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  if (node->is_object()) fail(ErrorCode::kInvalidConfig, "cannot override section '" + key + "' with --set");
  *node = std::move(value);
}

/// Sets every stage's seed.
inline void apply_seed(json& config, std::uint64_t seed) {
  config["selector"]["seed"] = seed;
  config["train"]["seed"] = seed;
  config["synth"]["seed"] = seed;
  config["ablation"]["seed"] = seed;
}

/// FNV-1a 64 over the compact dump of the effective config.
inline std::uint64_t config_hash(const json& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : config.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) { return fmt::format("{:016x}", v); }

}  // namespace catchphrase
