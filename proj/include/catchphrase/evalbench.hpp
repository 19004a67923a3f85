#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "catchphrase/dataset.hpp"
#include "catchphrase/embedding.hpp"
#include "catchphrase/error.hpp"
#include "catchphrase/mapnet.hpp"
#include "catchphrase/objectives.hpp"
#include "catchphrase/promptmine.hpp"
#include "catchphrase/rng.hpp"
#include "catchphrase/selector.hpp"
#include "catchphrase/trainer.hpp"

namespace catchphrase {

// --- synthetic misalignment data ---------------------------------------------

/// Embedding-space world with controllable class- and instance-level
/// confusion. Each class has a prototype per space and `prompts_per_class`
/// sub-types; every audio clip belongs to one sub-type and its ground-truth
/// prompt is that sub-type's prompt.
struct SynthConfig {
  std::size_t n_classes = 4;
  std::size_t audio_per_class = 60;
  std::size_t prompts_per_class = 10;
  std::size_t dim_selector = 256;
  std::size_t dim_encoder_audio = 32;
  std::size_t dim_encoder_text = 32;
  // Per-coordinate standard deviation of the gaussian added to audio.
  double noise_sigma = 0.02;
  // Class pairs whose template prompts share one direction.
  std::vector<std::pair<std::size_t, std::size_t>> homograph_pairs = {{0, 1}};
  // Fraction of audio whose selector embedding sits near another class.
  double illusion_rate = 0.2;
  std::size_t distractor_prompts_per_class = 6;
  // Prompts that mix the class with another one (the homograph partner when
  // there is one): r^p ~ s_c + ambiguity_mix * s_other, f^t ~ t_c + t_other.
  std::size_t ambiguous_prompts_per_class = 3;
  double ambiguity_mix = 0.5;
  // Weight of a sub-type's direction relative to its class prototype.
  double subtype_scale = 0.75;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_classes < 2) fail(ErrorCode::kInvalidConfig, "synth.n_classes must be >= 2");
    if (audio_per_class < 1 || prompts_per_class < 1) {
      fail(ErrorCode::kInvalidConfig, "synth needs >= 1 audio and prompt per class");
    }
    if (dim_selector < 2 || dim_encoder_audio < 2 || dim_encoder_text < 2) {
      fail(ErrorCode::kInvalidConfig, "synth dims must be >= 2");
    }
    if (!(noise_sigma >= 0.0)) fail(ErrorCode::kInvalidConfig, "synth.noise_sigma must be >= 0");
    if (!(illusion_rate >= 0.0 && illusion_rate <= 1.0)) {
      fail(ErrorCode::kInvalidConfig, "synth.illusion_rate must lie in [0,1]");
    }
    if (!(ambiguity_mix >= 0.0) || !(subtype_scale >= 0.0)) {
      fail(ErrorCode::kInvalidConfig, "synth mixing weights must be >= 0");
    }
    std::set<std::size_t> seen;
    for (auto [a, b] : homograph_pairs) {
      if (a >= n_classes || b >= n_classes || a == b) {
        fail(ErrorCode::kInvalidConfig, "homograph pair references a missing class");
      }
      if (!seen.insert(a).second || !seen.insert(b).second) {
        fail(ErrorCode::kInvalidConfig, "a class may belong to at most one homograph pair");
      }
    }
  }
};

inline std::string synth_class_label(std::size_t c) { return "class" + std::to_string(c); }
inline std::string synth_true_prompt_id(std::size_t c, std::size_t k) {
  return fmt::format("p{}_true{}", c, k);
}
inline std::string synth_template_prompt_id(std::size_t c) { return fmt::format("p{}_template", c); }

/// Prototypes behind a generated dataset, kept for construction checks.
struct SyntheticWorld {
  Dataset dataset;
  std::vector<std::vector<double>> selector_prototypes;
  std::vector<std::vector<double>> audio_prototypes;
  std::vector<std::vector<double>> text_prototypes;
};

namespace synth_detail {

inline std::vector<double> random_unit(Pcg32& rng, std::size_t dim) {
  std::vector<double> v(dim);
  for (auto& x : v) x = rng.normal();
  return l2_normalize(std::span<const double>(v));
}

// normalize(a + wb * b + noise)
inline std::vector<double> mix(std::span<const double> a, std::span<const double> b, double wb, double sigma,
                               Pcg32& noise_rng) {
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) v[i] = a[i] + wb * b[i];
  if (sigma > 0.0) {
    for (auto& x : v) x += sigma * noise_rng.normal();
  }
  return l2_normalize(std::span<const double>(v));
}

inline EmbeddingVector to_embedding(const std::vector<double>& v) {
  return EmbeddingVector::from(std::span<const double>(v));
}

}  // namespace synth_detail

inline SyntheticWorld generate_world(const SynthConfig& config) {
  using namespace synth_detail;
  config.validate();
  const std::size_t n = config.n_classes;
  const std::size_t k_sub = config.prompts_per_class;
  Pcg32 proto_rng(config.seed, 0x9707ULL);
  Pcg32 audio_rng(config.seed, 0xa0d10ULL);
  Pcg32 noise_rng(config.seed, 0x4015eULL);
  Pcg32 prompt_rng(config.seed, 0x960ULL);

  SyntheticWorld w;
  std::vector<std::vector<std::vector<double>>> sel_sub(n), aud_sub(n), txt_sub(n);
  for (std::size_t c = 0; c < n; ++c) {
    w.selector_prototypes.push_back(random_unit(proto_rng, config.dim_selector));
    w.audio_prototypes.push_back(random_unit(proto_rng, config.dim_encoder_audio));
    w.text_prototypes.push_back(random_unit(proto_rng, config.dim_encoder_text));
    for (std::size_t k = 0; k < k_sub; ++k) {
      sel_sub[c].push_back(random_unit(proto_rng, config.dim_selector));
      aud_sub[c].push_back(random_unit(proto_rng, config.dim_encoder_audio));
      txt_sub[c].push_back(random_unit(proto_rng, config.dim_encoder_text));
    }
  }
  std::vector<std::size_t> partner(n, n);
  for (auto [a, b] : config.homograph_pairs) {
    partner[a] = b;
    partner[b] = a;
  }

  auto& ds = w.dataset;
  ds.manifest.dim_selector = config.dim_selector;
  ds.manifest.dim_encoder_audio = config.dim_encoder_audio;
  ds.manifest.dim_encoder_text = config.dim_encoder_text;
  ds.manifest.encoder_names = {"synthetic-selector", "synthetic-audio", "synthetic-text"};
  for (std::size_t c = 0; c < n; ++c) ds.manifest.classes.push_back(synth_class_label(c));

  const double beta = config.subtype_scale;
  for (std::size_t c = 0; c < n; ++c) {
    for (std::size_t i = 0; i < config.audio_per_class; ++i) {
      std::size_t k = audio_rng.bounded(static_cast<std::uint32_t>(k_sub));
      AudioRecord a;
      a.id = fmt::format("a{}_{:04d}", c, i);
      a.class_label = synth_class_label(c);
      a.truth_prompt_id = synth_true_prompt_id(c, k);
      bool illusion = audio_rng.uniform_open() < config.illusion_rate;
      if (illusion) {
        auto other = audio_rng.bounded(static_cast<std::uint32_t>(n - 1));
        if (other >= c) ++other;
        auto other_k = audio_rng.bounded(static_cast<std::uint32_t>(k_sub));
        a.selector_emb = to_embedding(
            mix(w.selector_prototypes[other], sel_sub[other][other_k], beta, config.noise_sigma, noise_rng));
      } else {
        a.selector_emb =
            to_embedding(mix(w.selector_prototypes[c], sel_sub[c][k], beta, config.noise_sigma, noise_rng));
      }
      a.encoder_emb = to_embedding(mix(w.audio_prototypes[c], aud_sub[c][k], beta, config.noise_sigma, noise_rng));
      ds.audio.push_back(std::move(a));
    }
  }

  constexpr std::array<PromptSource, 4> kChannels = {PromptSource::kLlmVisual, PromptSource::kLlmAuditory,
                                                     PromptSource::kLlmSemantic, PromptSource::kAcm};
  for (std::size_t c = 0; c < n; ++c) {
    const auto label = synth_class_label(c);
    {
      PromptRecord t;
      t.id = synth_template_prompt_id(c);
      t.class_label = label;
      t.source = PromptSource::kTemplate;
      t.text = "a sound of a " + label;
      if (partner[c] < n) {
        auto o = partner[c];
        t.selector_emb = to_embedding(mix(w.selector_prototypes[c], w.selector_prototypes[o], 1.0, 0.0, noise_rng));
        t.target_emb = to_embedding(mix(w.text_prototypes[c], w.text_prototypes[o], 1.0, 0.0, noise_rng));
      } else {
        t.selector_emb = to_embedding(w.selector_prototypes[c]);
        t.target_emb = to_embedding(w.text_prototypes[c]);
      }
      ds.prompts.push_back(std::move(t));
    }
    for (std::size_t k = 0; k < k_sub; ++k) {
      PromptRecord p;
      p.id = synth_true_prompt_id(c, k);
      p.class_label = label;
      p.source = kChannels[k % kChannels.size()];
      p.text = fmt::format("{} heard as sub-type {}", label, k);
      p.selector_emb = to_embedding(mix(w.selector_prototypes[c], sel_sub[c][k], beta, 0.0, noise_rng));
      p.target_emb = to_embedding(mix(w.text_prototypes[c], txt_sub[c][k], beta, 0.0, noise_rng));
      ds.prompts.push_back(std::move(p));
    }
    for (std::size_t j = 0; j < config.ambiguous_prompts_per_class; ++j) {
      auto o = partner[c] < n ? partner[c] : (c + 1) % n;
      PromptRecord p;
      p.id = fmt::format("p{}_ambiguous{}", c, j);
      p.class_label = label;
      p.source = kChannels[j % 3];
      p.text = fmt::format("{} described in terms of {}", label, synth_class_label(o));
      auto sel_dir = mix(w.selector_prototypes[c], w.selector_prototypes[o], config.ambiguity_mix, 0.0, noise_rng);
      auto jitter = random_unit(prompt_rng, config.dim_selector);
      p.selector_emb = to_embedding(mix(sel_dir, jitter, 0.1, 0.0, noise_rng));
      p.target_emb = to_embedding(mix(w.text_prototypes[c], w.text_prototypes[o], 1.0, 0.0, noise_rng));
      ds.prompts.push_back(std::move(p));
    }
    for (std::size_t j = 0; j < config.distractor_prompts_per_class; ++j) {
      PromptRecord p;
      p.id = fmt::format("p{}_distractor{}", c, j);
      p.class_label = label;
      p.source = kChannels[j % 3];
      p.text = fmt::format("off-topic description {} for {}", j, label);
      p.selector_emb = to_embedding(random_unit(prompt_rng, config.dim_selector));
      p.target_emb = to_embedding(random_unit(prompt_rng, config.dim_encoder_text));
      ds.prompts.push_back(std::move(p));
    }
  }
  validate(ds);
  return w;
}

inline Dataset gen_synthetic(const SynthConfig& config) { return generate_world(config).dataset; }

// --- metrics -----------------------------------------------------------------

/// Ground-truth pairing carried by the audio records' truth field.
inline std::vector<Assignment> ground_truth(std::span<const AudioRecord> audio) {
  std::vector<Assignment> out;
  for (const auto& a : audio) {
    if (!a.truth_prompt_id) fail(ErrorCode::kMissingAssignment, "audio '" + a.id + "' has no ground truth");
    out.push_back({a.id, *a.truth_prompt_id, 1.0});
  }
  return out;
}

/// Fraction of audio whose assigned prompt equals its ground-truth prompt.
inline double recall_at_1(std::span<const Assignment> assignments, std::span<const Assignment> truth) {
  std::map<std::string, std::string> expected;
  for (const auto& t : truth) expected[t.audio_id] = t.prompt_id;
  std::map<std::string, std::string> got;
  for (const auto& a : assignments) got[a.audio_id] = a.prompt_id;
  if (got.size() != expected.size() || got.size() != assignments.size() || expected.size() != truth.size()) {
    fail(ErrorCode::kIdMismatch, "assignment and ground-truth id sets differ");
  }
  if (expected.empty()) fail(ErrorCode::kIdMismatch, "no audio to score");
  std::size_t hits = 0;
  for (const auto& [id, prompt] : got) {
    auto it = expected.find(id);
    if (it == expected.end()) fail(ErrorCode::kIdMismatch, "audio '" + id + "' missing from ground truth");
    hits += it->second == prompt ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(got.size());
}

/// Mean cosine between M(f^a) and the f^t of each audio's ground-truth prompt.
inline double alignment_score(const Model& model, const Dataset& ds, std::span<const Assignment> truth,
                              bool normalize_features = false) {
  if (truth.empty()) fail(ErrorCode::kIdMismatch, "no audio to score");
  if (model.mapper_config.in_dim != ds.manifest.dim_encoder_audio ||
      model.mapper_config.out_dim != ds.manifest.dim_encoder_text) {
    fail(ErrorCode::kDimensionMismatch, "model dims do not match the dataset");
  }
  double acc = 0.0;
  for (const auto& t : truth) {
    const auto* a = ds.find_audio(t.audio_id);
    const auto* p = ds.find_prompt(t.prompt_id);
    if (a == nullptr || p == nullptr) fail(ErrorCode::kIdMismatch, "unknown id in ground truth");
    auto mapped = forward(model.mapper, model.mapper_config, feature(a->encoder_emb, normalize_features));
    acc += cosine_sim(std::span<const double>(mapped), p->target_emb.values());
  }
  return acc / static_cast<double>(truth.size());
}

// --- ablation ------------------------------------------------------------------

enum class Variant { kBaselineTemplate, kExpromptOnly, kExpromptF, kExpromptR, kExpromptFR };

inline constexpr std::array<Variant, 5> kAllVariants = {Variant::kBaselineTemplate, Variant::kExpromptOnly,
                                                        Variant::kExpromptF, Variant::kExpromptR,
                                                        Variant::kExpromptFR};

constexpr std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::kBaselineTemplate: return "baseline_template";
    case Variant::kExpromptOnly: return "exprompt_only";
    case Variant::kExpromptF: return "exprompt_F";
    case Variant::kExpromptR: return "exprompt_R";
    case Variant::kExpromptFR: return "exprompt_FR";
  }
  return "unknown";
}

struct AblationConfig {
  SelectorConfig selector;
  TrainConfig train;
  // Every test_every-th clip of a class (ordinal % test_every == test_every - 1)
  // is held out for scoring.
  std::size_t test_every = 5;
  std::uint64_t pairing_seed = 0;
};

/// Benchmark defaults: small nets and a short schedule so the five-variant
/// study runs in seconds.
inline AblationConfig default_ablation_config(std::uint64_t seed) {
  AblationConfig c;
  c.selector.seed = seed;
  c.train.seed = seed;
  c.train.lr = 1e-3;
  c.train.batch_size = 32;
  c.train.steps = 600;
  c.train.hidden = {64};
  // Unit-norm synthetic features: the large reconstruction and adversarial
  // weights swamp the regression terms at this scale.
  c.train.weights = {1.0, 1.0, 0.01, 0.5};
  c.pairing_seed = seed;
  return c;
}

struct SplitDataset {
  Dataset train;
  Dataset test;
};

inline SplitDataset split_dataset(const Dataset& ds, std::size_t test_every) {
  if (test_every < 2) fail(ErrorCode::kInvalidConfig, "test_every must be >= 2");
  SplitDataset s{{ds.manifest, {}, ds.prompts}, {ds.manifest, {}, ds.prompts}};
  std::map<std::string, std::size_t> ordinal;
  for (const auto& a : ds.audio) {
    auto k = ordinal[a.class_label]++;
    (k % test_every == test_every - 1 ? s.test : s.train).audio.push_back(a);
  }
  return s;
}

/// Prompt pairing of one ablation variant for every training clip.
inline std::vector<Assignment> pair_prompts(const Dataset& train, Variant variant, const SelectorConfig& selector,
                                            std::uint64_t pairing_seed) {
  std::vector<Assignment> out;
  if (variant == Variant::kBaselineTemplate) {
    std::map<std::string, std::string> templates;
    for (const auto& p : train.prompts) {
      if (p.source == PromptSource::kTemplate && !templates.contains(p.class_label)) templates[p.class_label] = p.id;
    }
    for (const auto& a : train.audio) {
      auto it = templates.find(a.class_label);
      if (it == templates.end()) fail(ErrorCode::kEmptyFilteredClass, "no template prompt for '" + a.class_label + "'");
      out.push_back({a.id, it->second, 0.0});
    }
    return out;
  }
  auto pool = exprompt_pool(train);
  bool filtered = variant == Variant::kExpromptF || variant == Variant::kExpromptFR;
  auto buckets = filtered ? run_filter(train, pool, selector) : bucket_all(pool);
  if (variant == Variant::kExpromptR || variant == Variant::kExpromptFR) return retrieve_all(train.audio, buckets);

  Pcg32 rng(pairing_seed, 0x9a12ULL);
  for (const auto& a : train.audio) {
    const auto* bucket = buckets.bucket(a.class_label);
    if (bucket == nullptr || bucket->empty()) {
      fail(ErrorCode::kEmptyFilteredClass, "no prompts for class '" + a.class_label + "'");
    }
    const auto& pick = (*bucket)[rng.bounded(static_cast<std::uint32_t>(bucket->size()))];
    out.push_back({a.id, pick.prompt.id, 0.0});
  }
  return out;
}

struct VariantResult {
  Variant variant = Variant::kExpromptFR;
  double alignment = 0.0;
  double recall_at_1 = 0.0;
};

struct AblationReport {
  std::vector<VariantResult> rows;
  double untrained_alignment = 0.0;
  std::uint64_t seed = 0;

  const VariantResult& row(Variant v) const {
    for (const auto& r : rows)
      if (r.variant == v) return r;
    fail(ErrorCode::kIdMismatch, "variant missing from report");
  }
};

inline VariantResult run_variant(const SplitDataset& split, const AblationConfig& config, Variant variant) {
  auto assignments = pair_prompts(split.train, variant, config.selector, config.pairing_seed);
  auto trained = train(split.train, assignments, config.train);
  auto truth_test = ground_truth(split.test.audio);
  auto truth_train = ground_truth(split.train.audio);
  return {variant,
          alignment_score(trained.state.model, split.test, truth_test, config.train.normalize_features),
          recall_at_1(assignments, truth_train)};
}

/// Trains the five pairing strategies with identical configs and seeds.
inline AblationReport run_ablation(const Dataset& ds, const AblationConfig& config) {
  auto split = split_dataset(ds, config.test_every);
  AblationReport report;
  report.seed = config.train.seed;
  auto untrained = initial_state(split.train, config.train);
  report.untrained_alignment = alignment_score(untrained.model, split.test, ground_truth(split.test.audio),
                                               config.train.normalize_features);
  for (auto v : kAllVariants) report.rows.push_back(run_variant(split, config, v));
  return report;
}

inline nlohmann::json to_json(const AblationReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"variant", std::string(to_string(row.variant))},
                    {"alignment", row.alignment},
                    {"recall_at_1", row.recall_at_1}});
  }
  return {{"seed", r.seed}, {"untrained_alignment", r.untrained_alignment}, {"variants", rows}};
}

inline AblationReport ablation_from_json(const nlohmann::json& j) {
  AblationReport r;
  try {
    r.seed = j.at("seed").get<std::uint64_t>();
    r.untrained_alignment = j.at("untrained_alignment").get<double>();
    for (const auto& row : j.at("variants")) {
      auto name = row.at("variant").get<std::string>();
      bool found = false;
      for (auto v : kAllVariants) {
        if (to_string(v) == name) {
          r.rows.push_back({v, row.at("alignment").get<double>(), row.at("recall_at_1").get<double>()});
          found = true;
        }
      }
      if (!found) fail(ErrorCode::kCorruptManifest, "unknown variant '" + name + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kCorruptManifest, std::string("ablation report: ") + e.what());
  }
  return r;
}

/// Aligned plain-text table with EXPrompt / F / R check columns.
inline std::string format_table(const AblationReport& r) {
  std::string out = fmt::format("{:<20} {:^8} {:^3} {:^3} {:>10} {:>8}\n", "variant", "EXPrompt", "F", "R",
                                "alignment", "R@1");
  for (const auto& row : r.rows) {
    bool ex = row.variant != Variant::kBaselineTemplate;
    bool f = row.variant == Variant::kExpromptF || row.variant == Variant::kExpromptFR;
    bool rr = row.variant == Variant::kExpromptR || row.variant == Variant::kExpromptFR;
    out += fmt::format("{:<20} {:^8} {:^3} {:^3} {:>10.4f} {:>8.4f}\n", to_string(row.variant), ex ? "x" : "-",
                       f ? "x" : "-", rr ? "x" : "-", row.alignment, row.recall_at_1);
  }
  out += fmt::format("untrained mapper alignment: {:.4f}\n", r.untrained_alignment);
  return out;
}

}  // namespace catchphrase
