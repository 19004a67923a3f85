#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "catchphrase/embedding.hpp"
#include "catchphrase/error.hpp"
#include "catchphrase/mapnet.hpp"

namespace catchphrase {

/// Weights of the total objective: mse, reconstruction, adversarial, InfoNCE.
struct LossWeights {
  double mse = 1.0;
  double rec = 10000.0;
  double adv = 10000.0;
  double infonce = 0.5;

  friend bool operator==(const LossWeights&, const LossWeights&) = default;

  void validate() const {
    for (double w : {mse, rec, adv, infonce}) {
      if (!std::isfinite(w) || w < 0.0) fail(ErrorCode::kInvalidConfig, "loss weights must be finite and >= 0");
    }
  }
};

struct LossComponents {
  double mse = 0.0;
  double rec = 0.0;
  double adv = 0.0;  // generator side of the adversarial loss
  double infonce = 0.0;
};

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    fail(ErrorCode::kDimensionMismatch,
         "squared_distance: dims " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

/// Batch mean of ||target - output||^2.
inline double loss_mse(std::span<const std::vector<double>> targets,
                       std::span<const std::vector<double>> outputs) {
  if (targets.size() != outputs.size()) fail(ErrorCode::kDimensionMismatch, "loss_mse: batch sizes differ");
  if (targets.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t b = 0; b < targets.size(); ++b) acc += squared_distance(targets[b], outputs[b]);
  return acc / static_cast<double>(targets.size());
}

inline double loss_mse(std::span<const double> target, std::span<const double> output) {
  return squared_distance(target, output);
}

/// Reconstruction loss: same form as loss_mse, with f^a against N(M(f^a)).
inline double loss_rec(std::span<const std::vector<double>> audio,
                       std::span<const std::vector<double>> reconstructed) {
  return loss_mse(audio, reconstructed);
}

inline double loss_rec(std::span<const double> audio, std::span<const double> reconstructed) {
  return squared_distance(audio, reconstructed);
}

inline double clamp_prob(double p) {
  if (!(p >= 0.0 && p <= 1.0)) fail(ErrorCode::kOutOfRange, "probability " + std::to_string(p) + " outside [0,1]");
  return std::clamp(p, kProbEpsilon, 1.0 - kProbEpsilon);
}

/// mean log D(real) + mean log(1 - D(fake)), probabilities clamped to
/// [eps, 1-eps]. The discriminator ascends this value.
inline double loss_adv(std::span<const double> d_real, std::span<const double> d_fake) {
  if (d_real.empty() || d_fake.empty()) fail(ErrorCode::kOutOfRange, "loss_adv: empty input");
  double real = 0.0;
  for (double p : d_real) real += std::log(clamp_prob(p));
  double fake = 0.0;
  for (double p : d_fake) fake += std::log(1.0 - clamp_prob(p));
  return real / static_cast<double>(d_real.size()) + fake / static_cast<double>(d_fake.size());
}

struct InfoNceBatch {
  std::vector<double> query;
  std::vector<double> positive;
  std::vector<std::vector<double>> negatives;
  double tau = 0.8;
};

/// -log softmax of the positive logit, computed with a max shift.
inline double infonce_from_similarities(double positive_sim, std::span<const double> negative_sims,
                                        double tau) {
  if (!(tau > 0.0)) fail(ErrorCode::kInvalidConfig, "InfoNCE temperature must be > 0");
  if (negative_sims.empty()) return 0.0;
  double shift = positive_sim / tau;
  for (double s : negative_sims) shift = std::max(shift, s / tau);
  double denom = std::exp(positive_sim / tau - shift);
  for (double s : negative_sims) denom += std::exp(s / tau - shift);
  return -(positive_sim / tau - shift) + std::log(denom);
}

inline double loss_infonce(const InfoNceBatch& batch) {
  double pos = cosine_sim(batch.query, batch.positive);
  std::vector<double> neg;
  neg.reserve(batch.negatives.size());
  for (const auto& k : batch.negatives) neg.push_back(cosine_sim(batch.query, k));
  return infonce_from_similarities(pos, neg, batch.tau);
}

inline double loss_total(const LossComponents& c, const LossWeights& w) {
  return w.mse * c.mse + w.rec * c.rec + w.adv * c.adv + w.infonce * c.infonce;
}

// --- full model objective ----------------------------------------------------

/// Mapper M, decoder N and discriminator D with their shapes.
struct Model {
  NetConfig mapper_config;
  NetConfig decoder_config;
  NetConfig disc_config;
  NetParams mapper;
  NetParams decoder;
  NetParams disc;

  friend bool operator==(const Model&, const Model&) = default;
};

inline Model make_model(std::size_t audio_dim, std::size_t text_dim, const std::vector<std::size_t>& hidden,
                        Activation hidden_activation, std::uint64_t seed) {
  Model m;
  m.mapper_config = mapper_config(audio_dim, text_dim, hidden);
  m.decoder_config = decoder_config(text_dim, audio_dim, hidden);
  m.disc_config = discriminator_config(text_dim, hidden);
  for (auto* c : {&m.mapper_config, &m.decoder_config, &m.disc_config}) c->hidden_activation = hidden_activation;
  m.mapper = init_params(m.mapper_config, seed * 3 + 0);
  m.decoder = init_params(m.decoder_config, seed * 3 + 1);
  m.disc = init_params(m.disc_config, seed * 3 + 2);
  return m;
}

/// One training minibatch. `negatives[b]` lists batch positions whose mapped
/// audio act as InfoNCE negatives for anchor b (repeats allowed); anchors with
/// no negatives are left out of the InfoNCE mean.
struct MiniBatch {
  std::vector<std::vector<double>> audio;   // f^a
  std::vector<std::vector<double>> target;  // f^t of the paired prompt
  std::vector<std::vector<double>> query;   // InfoNCE query per anchor
  std::vector<std::vector<std::size_t>> negatives;

  std::size_t size() const { return audio.size(); }
};

struct ObjectiveConfig {
  LossWeights weights;
  double tau = 0.8;
  // Mapper minimizes -log D(M(f^a)) instead of log(1 - D(M(f^a))).
  bool non_saturating = false;
};

struct Evaluation {
  LossComponents components;
  double total = 0.0;           // mapper/decoder objective
  double adversarial = 0.0;     // full two-sided adversarial value
  double disc_objective = 0.0;  // -adversarial, minimized by D
};

struct Gradients {
  NetParams mapper;
  NetParams decoder;
  NetParams disc;
};

namespace objective_detail {

inline void check_batch(const Model& model, const MiniBatch& batch) {
  std::size_t n = batch.size();
  if (n == 0) fail(ErrorCode::kDimensionMismatch, "empty minibatch");
  if (batch.target.size() != n || batch.query.size() != n || batch.negatives.size() != n) {
    fail(ErrorCode::kDimensionMismatch, "minibatch fields have different lengths");
  }
  for (const auto& negs : batch.negatives) {
    for (auto k : negs) {
      if (k >= n) fail(ErrorCode::kDimensionMismatch, "negative index outside the batch");
    }
  }
  check_shapes(model.mapper, model.mapper_config);
  check_shapes(model.decoder, model.decoder_config);
  check_shapes(model.disc, model.disc_config);
}

// d cos(q, k) / d k
inline void add_cosine_grad_wrt_k(std::span<const double> q, std::span<const double> k, double scale,
                                  std::span<double> out) {
  double nq = l2_norm(q);
  double nk = l2_norm(k);
  if (nq == 0.0 || nk == 0.0) fail(ErrorCode::kZeroVector, "InfoNCE: all-zero vector");
  double c = dot(q, k) / (nq * nk);
  for (std::size_t i = 0; i < k.size(); ++i) {
    out[i] += scale * (q[i] / (nq * nk) - c * k[i] / (nk * nk));
  }
}

struct Forward {
  std::vector<ForwardTrace> mapper;
  std::vector<ForwardTrace> decoder;
  std::vector<ForwardTrace> disc_fake;
  std::vector<ForwardTrace> disc_real;
};

inline Forward run_forward(const Model& model, const MiniBatch& batch) {
  Forward f;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    f.mapper.push_back(forward_trace(model.mapper, model.mapper_config, batch.audio[b]));
    const auto mapped = f.mapper.back().output();
    f.decoder.push_back(forward_trace(model.decoder, model.decoder_config, mapped));
    f.disc_fake.push_back(forward_trace(model.disc, model.disc_config, mapped));
    f.disc_real.push_back(forward_trace(model.disc, model.disc_config, batch.target[b]));
  }
  return f;
}

inline Evaluation evaluate_forward(const MiniBatch& batch, const ObjectiveConfig& config, const Forward& f) {
  const double n = static_cast<double>(batch.size());
  Evaluation e;
  double real = 0.0;
  double fake = 0.0;
  double gen = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    e.components.mse += squared_distance(batch.target[b], f.mapper[b].output());
    e.components.rec += squared_distance(batch.audio[b], f.decoder[b].output());
    double p_fake = f.disc_fake[b].output()[0];
    double p_real = f.disc_real[b].output()[0];
    real += std::log(p_real);
    fake += std::log(1.0 - p_fake);
    gen += config.non_saturating ? -std::log(p_fake) : std::log(1.0 - p_fake);
  }
  e.components.mse /= n;
  e.components.rec /= n;
  e.components.adv = gen / n;
  e.adversarial = real / n + fake / n;
  e.disc_objective = -e.adversarial;

  double info = 0.0;
  std::size_t anchors = 0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    if (batch.negatives[b].empty()) continue;
    const auto& q = batch.query[b];
    double pos = cosine_sim(std::span<const double>(q), f.mapper[b].output());
    std::vector<double> neg;
    for (auto k : batch.negatives[b]) neg.push_back(cosine_sim(std::span<const double>(q), f.mapper[k].output()));
    info += infonce_from_similarities(pos, neg, config.tau);
    ++anchors;
  }
  e.components.infonce = anchors == 0 ? 0.0 : info / static_cast<double>(anchors);
  e.total = loss_total(e.components, config.weights);
  return e;
}

}  // namespace objective_detail

/// Loss values only (no gradients).
inline Evaluation evaluate(const Model& model, const MiniBatch& batch, const ObjectiveConfig& config) {
  objective_detail::check_batch(model, batch);
  auto f = objective_detail::run_forward(model, batch);
  return objective_detail::evaluate_forward(batch, config, f);
}

/// Only the discriminator's objective; skips the decoder pass.
inline double disc_objective(const Model& model, const MiniBatch& batch) {
  objective_detail::check_batch(model, batch);
  double real = 0.0;
  double fake = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    auto mapped = forward(model.mapper, model.mapper_config, batch.audio[b]);
    fake += std::log(1.0 - forward_scalar(model.disc, model.disc_config, mapped));
    real += std::log(forward_scalar(model.disc, model.disc_config, batch.target[b]));
  }
  const double n = static_cast<double>(batch.size());
  return -(real / n + fake / n);
}

struct BackwardResult {
  Evaluation loss;
  Gradients grad;
};

/// Exact gradients. Mapper and decoder get d(total)/d(theta); the
/// discriminator gets d(disc_objective)/d(theta), so a descent step on it
/// ascends the adversarial value. D is held fixed while differentiating the
/// mapper objective.
inline BackwardResult backward(const Model& model, const MiniBatch& batch, const ObjectiveConfig& config,
                               bool with_disc = true) {
  using namespace objective_detail;
  check_batch(model, batch);
  auto f = run_forward(model, batch);
  BackwardResult out;
  out.loss = evaluate_forward(batch, config, f);
  out.grad.mapper = zeros_like(model.mapper);
  out.grad.decoder = zeros_like(model.decoder);
  out.grad.disc = zeros_like(model.disc);

  const auto& w = config.weights;
  const std::size_t n_batch = batch.size();
  const double n = static_cast<double>(n_batch);
  std::vector<std::vector<double>> d_mapped(n_batch);
  for (std::size_t b = 0; b < n_batch; ++b) d_mapped[b].assign(model.mapper_config.out_dim, 0.0);

  NetParams scratch_disc = zeros_like(model.disc);
  for (std::size_t b = 0; b < n_batch; ++b) {
    auto mapped = f.mapper[b].output();
    auto& dm = d_mapped[b];
    if (w.mse != 0.0) {
      for (std::size_t i = 0; i < dm.size(); ++i) dm[i] += w.mse * 2.0 / n * (mapped[i] - batch.target[b][i]);
    }
    if (w.rec != 0.0) {
      auto rec = f.decoder[b].output();
      std::vector<double> dn(rec.size());
      for (std::size_t i = 0; i < rec.size(); ++i) dn[i] = w.rec * 2.0 / n * (rec[i] - batch.audio[b][i]);
      auto din = backward_accumulate(model.decoder, model.decoder_config, f.decoder[b], dn, out.grad.decoder);
      for (std::size_t i = 0; i < dm.size(); ++i) dm[i] += din[i];
    }
    if (w.adv != 0.0) {
      double p = f.disc_fake[b].output()[0];
      double dp = config.non_saturating ? -w.adv / (n * p) : -w.adv / (n * (1.0 - p));
      std::vector<double> g{dp};
      auto din = backward_accumulate(model.disc, model.disc_config, f.disc_fake[b], g, scratch_disc);
      for (std::size_t i = 0; i < dm.size(); ++i) dm[i] += din[i];
    }
  }

  if (w.infonce != 0.0) {
    std::size_t anchors = 0;
    for (const auto& negs : batch.negatives) anchors += negs.empty() ? 0 : 1;
    for (std::size_t b = 0; b < n_batch && anchors > 0; ++b) {
      const auto& negs = batch.negatives[b];
      if (negs.empty()) continue;
      std::span<const double> q = batch.query[b];
      std::vector<std::size_t> keys{b};
      keys.insert(keys.end(), negs.begin(), negs.end());
      std::vector<double> logits;
      for (auto k : keys) logits.push_back(cosine_sim(q, f.mapper[k].output()) / config.tau);
      double shift = *std::max_element(logits.begin(), logits.end());
      double denom = 0.0;
      for (double l : logits) denom += std::exp(l - shift);
      double scale = w.infonce / static_cast<double>(anchors);
      for (std::size_t j = 0; j < keys.size(); ++j) {
        double softmax = std::exp(logits[j] - shift) / denom;
        double dlogit = scale * (softmax - (j == 0 ? 1.0 : 0.0));
        add_cosine_grad_wrt_k(q, f.mapper[keys[j]].output(), dlogit / config.tau, d_mapped[keys[j]]);
      }
    }
  }

  for (std::size_t b = 0; b < n_batch; ++b) {
    backward_accumulate(model.mapper, model.mapper_config, f.mapper[b], d_mapped[b], out.grad.mapper);
  }

  // Discriminator: minimize -(mean log D(real) + mean log(1 - D(fake))).
  for (std::size_t b = 0; b < n_batch && with_disc; ++b) {
    double p_real = f.disc_real[b].output()[0];
    std::vector<double> g_real{-1.0 / (n * p_real)};
    backward_accumulate(model.disc, model.disc_config, f.disc_real[b], g_real, out.grad.disc);
    double p_fake = f.disc_fake[b].output()[0];
    std::vector<double> g_fake{1.0 / (n * (1.0 - p_fake))};
    backward_accumulate(model.disc, model.disc_config, f.disc_fake[b], g_fake, out.grad.disc);
  }
  return out;
}

/// Gradient of disc_objective w.r.t. the discriminator only.
inline NetParams disc_backward(const Model& model, const MiniBatch& batch) {
  objective_detail::check_batch(model, batch);
  NetParams grad = zeros_like(model.disc);
  const double n = static_cast<double>(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    auto mapped = forward(model.mapper, model.mapper_config, batch.audio[b]);
    auto fake = forward_trace(model.disc, model.disc_config, mapped);
    auto real = forward_trace(model.disc, model.disc_config, batch.target[b]);
    std::vector<double> g_real{-1.0 / (n * real.output()[0])};
    backward_accumulate(model.disc, model.disc_config, real, g_real, grad);
    std::vector<double> g_fake{1.0 / (n * (1.0 - fake.output()[0]))};
    backward_accumulate(model.disc, model.disc_config, fake, g_fake, grad);
  }
  return grad;
}

}  // namespace catchphrase
