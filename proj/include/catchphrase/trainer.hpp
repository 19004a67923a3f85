#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "catchphrase/dataset.hpp"
#include "catchphrase/error.hpp"
#include "catchphrase/log.hpp"
#include "catchphrase/mapnet.hpp"
#include "catchphrase/objectives.hpp"
#include "catchphrase/rng.hpp"
#include "catchphrase/selector.hpp"

namespace catchphrase {

enum class OptimizerKind { kSgd, kAdam };

constexpr std::string_view to_string(OptimizerKind k) { return k == OptimizerKind::kSgd ? "sgd" : "adam"; }

inline OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "sgd") return OptimizerKind::kSgd;
  if (name == "adam") return OptimizerKind::kAdam;
  fail(ErrorCode::kInvalidConfig, "unknown optimizer '" + std::string(name) + "'");
}

struct TrainConfig {
  LossWeights weights;
  double lr = 1e-4;
  std::size_t batch_size = 32;
  std::size_t steps = 1000;
  double tau = 0.8;
  std::size_t m_neg = 8;
  std::uint64_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t d_steps_per_g_step = 1;
  bool non_saturating = false;
  // L2-normalize f^a and f^t before training (off by default).
  bool normalize_features = false;
  std::vector<std::size_t> hidden = {256, 256};
  Activation hidden_activation = Activation::kTanh;

  void validate() const {
    weights.validate();
    if (!(lr > 0.0) || !std::isfinite(lr)) fail(ErrorCode::kInvalidConfig, "train.lr must be > 0");
    if (batch_size < 1) fail(ErrorCode::kInvalidConfig, "train.batch_size must be >= 1");
    if (m_neg > 0 && batch_size < 2) {
      fail(ErrorCode::kInvalidConfig, "train.batch_size must be >= 2 when m_neg > 0");
    }
    if (!(tau > 0.0)) fail(ErrorCode::kInvalidConfig, "train.tau must be > 0");
  }

  ObjectiveConfig objective() const { return {weights, tau, non_saturating}; }
};

/// First and second moments for one parameter set.
struct AdamMoments {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t t = 0;
};

struct ModelState {
  Model model;
  AdamMoments mapper_opt;
  AdamMoments decoder_opt;
  AdamMoments disc_opt;
  std::uint64_t step = 0;
};

struct LossRow {
  std::uint64_t step = 0;
  LossComponents components;
  double total = 0.0;
};

using LossHistory = std::vector<LossRow>;

/// One optimizer step in place. lr = 0 leaves the parameters bit-identical.
inline void apply_update(NetParams& params, const NetParams& grad, AdamMoments& moments,
                         const TrainConfig& config, double lr) {
  if (config.optimizer == OptimizerKind::kSgd) {
    auto g = grad.flatten();
    std::size_t k = 0;
    params.for_each([&](double& v) { v -= lr * g[k++]; });
    return;
  }
  auto g = grad.flatten();
  if (moments.m.empty()) {
    moments.m.assign(g.size(), 0.0);
    moments.v.assign(g.size(), 0.0);
  }
  ++moments.t;
  double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(moments.t));
  double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(moments.t));
  std::size_t k = 0;
  params.for_each([&](double& v) {
    moments.m[k] = config.beta1 * moments.m[k] + (1.0 - config.beta1) * g[k];
    moments.v[k] = config.beta2 * moments.v[k] + (1.0 - config.beta2) * g[k] * g[k];
    double mhat = moments.m[k] / bc1;
    double vhat = moments.v[k] / bc2;
    v -= lr * mhat / (std::sqrt(vhat) + config.adam_eps);
    ++k;
  });
}

struct TrainingPair {
  AudioRecord audio;
  PromptRecord prompt;
};

/// Pairs every audio record with its assigned prompt, in dataset order.
inline std::vector<TrainingPair> build_pairs(const Dataset& ds, std::span<const Assignment> assignments) {
  std::map<std::string, std::string> by_audio;
  for (const auto& a : assignments) by_audio[a.audio_id] = a.prompt_id;
  std::map<std::string, const PromptRecord*> prompts;
  for (const auto& p : ds.prompts) prompts[p.id] = &p;
  std::vector<TrainingPair> pairs;
  pairs.reserve(ds.audio.size());
  for (const auto& a : ds.audio) {
    auto it = by_audio.find(a.id);
    if (it == by_audio.end()) fail(ErrorCode::kMissingAssignment, "audio '" + a.id + "' has no assigned prompt");
    auto p = prompts.find(it->second);
    if (p == prompts.end()) fail(ErrorCode::kIdMismatch, "assigned prompt '" + it->second + "' not in dataset");
    if (p->second->class_label != a.class_label) {
      fail(ErrorCode::kClassMismatch, "audio '" + a.id + "' (" + a.class_label + ") paired with prompt '" +
                                          p->second->id + "' (" + p->second->class_label + ")");
    }
    pairs.push_back({a, *p->second});
  }
  return pairs;
}

/// Batch positions whose class differs from the anchor's: m_neg distinct
/// draws when enough candidates exist, otherwise m_neg draws with replacement.
inline std::vector<std::size_t> sample_negative_indices(std::span<const std::string> classes, std::size_t anchor,
                                                        std::size_t m_neg, Pcg32& rng) {
  if (m_neg == 0) return {};
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (classes[i] != classes[anchor]) candidates.push_back(i);
  }
  if (candidates.empty()) {
    fail(ErrorCode::kNoNegativesAvailable, "batch holds no sample of a class other than '" + classes[anchor] + "'");
  }
  std::vector<std::size_t> out;
  out.reserve(m_neg);
  if (candidates.size() >= m_neg) {
    for (auto k : sample_without_replacement(rng, candidates.size(), m_neg)) out.push_back(candidates[k]);
  } else {
    for (std::size_t i = 0; i < m_neg; ++i) {
      out.push_back(candidates[rng.bounded(static_cast<std::uint32_t>(candidates.size()))]);
    }
  }
  return out;
}

/// Mapped embeddings of the drawn negatives.
inline std::vector<std::vector<double>> sample_negatives(std::span<const std::vector<double>> mapped,
                                                         std::span<const std::string> classes, std::size_t anchor,
                                                         std::size_t m_neg, Pcg32& rng) {
  std::vector<std::vector<double>> out;
  for (auto k : sample_negative_indices(classes, anchor, m_neg, rng)) out.push_back(mapped[k]);
  return out;
}

inline std::vector<double> feature(const EmbeddingVector& v, bool normalize) {
  return normalize ? l2_normalize(v) : v.widened();
}

struct TrainHooks {
  std::size_t checkpoint_every = 0;
  std::function<void(const ModelState&)> on_checkpoint;
};

struct TrainResult {
  ModelState state;
  LossHistory history;
};

inline ModelState initial_state(const Dataset& ds, const TrainConfig& config) {
  ModelState s;
  s.model = make_model(ds.manifest.dim_encoder_audio, ds.manifest.dim_encoder_text, config.hidden,
                       config.hidden_activation, config.seed);
  return s;
}

/// Alternating optimization: per step, d_steps_per_g_step discriminator
/// updates on the adversarial objective, then one mapper+decoder update on the
/// weighted total. History records the pre-update losses of every step.
inline TrainResult train(const Dataset& ds, std::span<const Assignment> assignments, const TrainConfig& config,
                         const TrainHooks& hooks = {}) {
  config.validate();
  auto pairs = build_pairs(ds, assignments);
  if (pairs.empty()) fail(ErrorCode::kInvalidConfig, "no training pairs");

  TrainResult result;
  result.state = initial_state(ds, config);
  auto& state = result.state;
  const auto objective = config.objective();

  std::vector<std::vector<double>> audio_feats;
  std::vector<std::vector<double>> text_feats;
  for (const auto& p : pairs) {
    audio_feats.push_back(feature(p.audio.encoder_emb, config.normalize_features));
    text_feats.push_back(feature(p.prompt.target_emb, config.normalize_features));
  }

  Pcg32 batch_rng(config.seed, 0xba7c4ULL);
  Pcg32 neg_rng(config.seed, 0x4e6ULL);
  bool warned = false;
  std::size_t skipped = 0;

  for (std::size_t step = 0; step < config.steps; ++step) {
    std::vector<std::size_t> members;
    if (config.batch_size <= pairs.size()) {
      members = sample_without_replacement(batch_rng, pairs.size(), config.batch_size);
    } else {
      for (std::size_t i = 0; i < config.batch_size; ++i) {
        members.push_back(batch_rng.bounded(static_cast<std::uint32_t>(pairs.size())));
      }
    }
    MiniBatch batch;
    std::vector<std::string> classes;
    for (auto m : members) {
      batch.audio.push_back(audio_feats[m]);
      batch.target.push_back(text_feats[m]);
      batch.query.push_back(text_feats[m]);
      classes.push_back(pairs[m].audio.class_label);
    }
    for (std::size_t b = 0; b < members.size(); ++b) {
      try {
        batch.negatives.push_back(sample_negative_indices(classes, b, config.m_neg, neg_rng));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kNoNegativesAvailable) throw;
        batch.negatives.emplace_back();
        ++skipped;
        if (!warned) {
          logger()->warn("step {}: InfoNCE term skipped for single-class batch ({})", step, e.what());
          warned = true;
        }
      }
    }

    for (std::size_t d = 0; d < config.d_steps_per_g_step; ++d) {
      auto g = disc_backward(state.model, batch);
      apply_update(state.model.disc, g, state.disc_opt, config, config.lr);
    }

    auto r = backward(state.model, batch, objective, /*with_disc=*/false);
    const auto& c = r.loss.components;
    if (!std::isfinite(c.mse) || !std::isfinite(c.rec) || !std::isfinite(c.adv) || !std::isfinite(c.infonce) ||
        !std::isfinite(r.loss.total)) {
      fail(ErrorCode::kNonFiniteLoss, fmt::format("step {}: mse={} rec={} adv={} infonce={} total={}", step, c.mse,
                                                  c.rec, c.adv, c.infonce, r.loss.total));
    }
    result.history.push_back({step, c, r.loss.total});
    apply_update(state.model.mapper, r.grad.mapper, state.mapper_opt, config, config.lr);
    apply_update(state.model.decoder, r.grad.decoder, state.decoder_opt, config, config.lr);
    ++state.step;

    if (hooks.checkpoint_every > 0 && hooks.on_checkpoint && state.step % hooks.checkpoint_every == 0) {
      hooks.on_checkpoint(state);
    }
  }
  if (skipped > 0) logger()->info("InfoNCE skipped for {} anchor(s) without negatives", skipped);
  return result;
}

/// CSV with header step,mse,rec,adv,infonce,total; shortest round-trip reals.
inline std::string history_csv(const LossHistory& history) {
  std::string out = "step,mse,rec,adv,infonce,total\n";
  for (const auto& row : history) {
    const auto& c = row.components;
    out += fmt::format("{},{},{},{},{},{}\n", row.step, c.mse, c.rec, c.adv, c.infonce, row.total);
  }
  return out;
}

}  // namespace catchphrase
