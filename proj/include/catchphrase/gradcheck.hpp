#pragma once

// Central finite differences, used as the independent oracle for backward().
// Only forward passes and loss evaluation are involved here.

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "catchphrase/error.hpp"
#include "catchphrase/objectives.hpp"

namespace catchphrase {

/// (f(theta + h e_i) - f(theta - h e_i)) / 2h for every coordinate i.
inline std::vector<double> central_difference(const std::function<double(std::span<const double>)>& f,
                                              std::vector<double> theta, double h) {
  if (!(h > 0.0) || !std::isfinite(h)) fail(ErrorCode::kInvalidStep, "finite-difference step must be > 0");
  std::vector<double> grad(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    double saved = theta[i];
    theta[i] = saved + h;
    double up = f(theta);
    theta[i] = saved - h;
    double down = f(theta);
    theta[i] = saved;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

/// Finite-difference counterpart of backward(): mapper and decoder against
/// the total objective, discriminator against its own objective.
inline Gradients finite_diff_grad(const Model& model, const MiniBatch& batch, const ObjectiveConfig& config,
                                  double h) {
  if (!(h > 0.0) || !std::isfinite(h)) fail(ErrorCode::kInvalidStep, "finite-difference step must be > 0");
  Gradients g;
  Model probe = model;

  auto mapper_loss = [&](std::span<const double> theta) {
    probe.mapper.assign(theta);
    return evaluate(probe, batch, config).total;
  };
  g.mapper = zeros_like(model.mapper);
  g.mapper.assign(central_difference(mapper_loss, model.mapper.flatten(), h));
  probe.mapper = model.mapper;

  auto decoder_loss = [&](std::span<const double> theta) {
    probe.decoder.assign(theta);
    return evaluate(probe, batch, config).total;
  };
  g.decoder = zeros_like(model.decoder);
  g.decoder.assign(central_difference(decoder_loss, model.decoder.flatten(), h));
  probe.decoder = model.decoder;

  auto disc_loss = [&](std::span<const double> theta) {
    probe.disc.assign(theta);
    return disc_objective(probe, batch);
  };
  g.disc = zeros_like(model.disc);
  g.disc.assign(central_difference(disc_loss, model.disc.flatten(), h));
  return g;
}

/// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor).
inline double max_relative_error(std::span<const double> a, std::span<const double> b, double floor) {
  if (a.size() != b.size()) fail(ErrorCode::kDimensionMismatch, "max_relative_error: sizes differ");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

inline double max_relative_error(const Gradients& a, const Gradients& b, double floor) {
  return std::max({max_relative_error(a.mapper.flatten(), b.mapper.flatten(), floor),
                   max_relative_error(a.decoder.flatten(), b.decoder.flatten(), floor),
                   max_relative_error(a.disc.flatten(), b.disc.flatten(), floor)});
}

}  // namespace catchphrase
