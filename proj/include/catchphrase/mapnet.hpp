#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "catchphrase/error.hpp"
#include "catchphrase/rng.hpp"

namespace catchphrase {

enum class Activation { kIdentity, kTanh, kRelu, kSigmoid };

constexpr std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::kIdentity: return "identity";
    case Activation::kTanh: return "tanh";
    case Activation::kRelu: return "relu";
    case Activation::kSigmoid: return "sigmoid";
  }
  return "unknown";
}

inline Activation parse_activation(std::string_view name) {
  for (auto a : {Activation::kIdentity, Activation::kTanh, Activation::kRelu, Activation::kSigmoid}) {
    if (to_string(a) == name) return a;
  }
  fail(ErrorCode::kInvalidConfig, "unknown activation '" + std::string(name) + "'");
}

/// Output clamp for the discriminator's probability.
inline constexpr double kProbEpsilon = 1e-7;

struct NetConfig {
  std::size_t in_dim = 1;
  std::size_t out_dim = 1;
  std::vector<std::size_t> hidden = {256, 256};
  Activation hidden_activation = Activation::kTanh;
  Activation output_activation = Activation::kIdentity;

  friend bool operator==(const NetConfig&, const NetConfig&) = default;

  void validate() const {
    if (in_dim < 1 || out_dim < 1) fail(ErrorCode::kInvalidConfig, "net dims must be >= 1");
    for (auto w : hidden) {
      if (w < 1) fail(ErrorCode::kInvalidConfig, "hidden widths must be >= 1");
    }
    if (hidden_activation != Activation::kTanh && hidden_activation != Activation::kRelu) {
      fail(ErrorCode::kInvalidConfig, "hidden activation must be tanh or relu");
    }
    if (output_activation != Activation::kIdentity && output_activation != Activation::kSigmoid) {
      fail(ErrorCode::kInvalidConfig, "output activation must be identity or sigmoid");
    }
    if (output_activation == Activation::kSigmoid && out_dim != 1) {
      fail(ErrorCode::kInvalidConfig, "a sigmoid head must be scalar");
    }
  }

  std::vector<std::size_t> widths() const {
    std::vector<std::size_t> w{in_dim};
    w.insert(w.end(), hidden.begin(), hidden.end());
    w.push_back(out_dim);
    return w;
  }
};

/// Mapper M: audio-encoder space -> text-encoder space.
inline NetConfig mapper_config(std::size_t audio_dim, std::size_t text_dim,
                               std::vector<std::size_t> hidden = {256, 256}) {
  return {audio_dim, text_dim, std::move(hidden), Activation::kTanh, Activation::kIdentity};
}

/// Decoder N: text-encoder space -> audio-encoder space.
inline NetConfig decoder_config(std::size_t text_dim, std::size_t audio_dim,
                                std::vector<std::size_t> hidden = {256, 256}) {
  return {text_dim, audio_dim, std::move(hidden), Activation::kTanh, Activation::kIdentity};
}

/// Discriminator D: text-encoder space -> probability.
inline NetConfig discriminator_config(std::size_t text_dim, std::vector<std::size_t> hidden = {256, 256}) {
  return {text_dim, 1, std::move(hidden), Activation::kTanh, Activation::kSigmoid};
}

struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weight;  // row-major out x in
  std::vector<double> bias;

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

/// Layer parameters of one MLP. Gradients share this type.
struct NetParams {
  std::vector<DenseLayer> layers;

  friend bool operator==(const NetParams&, const NetParams&) = default;

  std::size_t size() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weight.size() + l.bias.size();
    return n;
  }

  /// Visits every scalar in a fixed order: per layer, weights then biases.
  template <typename Fn>
  void for_each(Fn&& fn) {
    for (auto& l : layers) {
      for (auto& w : l.weight) fn(w);
      for (auto& b : l.bias) fn(b);
    }
  }

  template <typename Fn>
  void for_each(Fn&& fn) const {
    for (const auto& l : layers) {
      for (const auto& w : l.weight) fn(w);
      for (const auto& b : l.bias) fn(b);
    }
  }

  std::vector<double> flatten() const {
    std::vector<double> out;
    out.reserve(size());
    for_each([&](double v) { out.push_back(v); });
    return out;
  }

  void assign(std::span<const double> flat) {
    if (flat.size() != size()) fail(ErrorCode::kDimensionMismatch, "flat parameter count mismatch");
    std::size_t k = 0;
    for_each([&](double& v) { v = flat[k++]; });
  }
};

inline NetParams zeros_like(const NetParams& p) {
  NetParams z = p;
  z.for_each([](double& v) { v = 0.0; });
  return z;
}

inline NetParams zero_params(const NetConfig& config) {
  config.validate();
  NetParams p;
  auto w = config.widths();
  for (std::size_t i = 0; i + 1 < w.size(); ++i) {
    p.layers.push_back({w[i], w[i + 1], std::vector<double>(w[i] * w[i + 1], 0.0),
                        std::vector<double>(w[i + 1], 0.0)});
  }
  return p;
}

/// Glorot-uniform weights in the open interval (-a, a), a = sqrt(6/(fan_in+fan_out)),
/// zero biases.
inline NetParams init_params(const NetConfig& config, std::uint64_t seed) {
  auto p = zero_params(config);
  Pcg32 rng(seed, 0x1a7e5ULL);
  for (auto& l : p.layers) {
    double a = std::sqrt(6.0 / static_cast<double>(l.in + l.out));
    for (auto& w : l.weight) w = a * (2.0 * rng.uniform_open() - 1.0);
  }
  return p;
}

inline void check_shapes(const NetParams& params, const NetConfig& config) {
  auto w = config.widths();
  if (params.layers.size() + 1 != w.size()) {
    fail(ErrorCode::kDimensionMismatch, "parameter depth does not match config");
  }
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const auto& l = params.layers[i];
    if (l.in != w[i] || l.out != w[i + 1] || l.weight.size() != l.in * l.out || l.bias.size() != l.out) {
      fail(ErrorCode::kDimensionMismatch, "layer " + std::to_string(i) + " shape does not match config");
    }
  }
}

/// Activations recorded by a forward pass; `values[0]` is the input and
/// `values.back()` the output.
struct ForwardTrace {
  std::vector<std::vector<double>> values;
  bool clamped = false;  // sigmoid output hit the [eps, 1-eps] clamp

  std::span<const double> output() const { return values.back(); }
};

namespace net_detail {

inline double activate(Activation a, double z) {
  switch (a) {
    case Activation::kIdentity: return z;
    case Activation::kTanh: return std::tanh(z);
    case Activation::kRelu: return z > 0.0 ? z : 0.0;
    case Activation::kSigmoid: return 1.0 / (1.0 + std::exp(-z));
  }
  return z;
}

// Derivative expressed through the activation's output y (and z for relu).
inline double activate_grad(Activation a, double y) {
  switch (a) {
    case Activation::kIdentity: return 1.0;
    case Activation::kTanh: return 1.0 - y * y;
    case Activation::kRelu: return y > 0.0 ? 1.0 : 0.0;
    case Activation::kSigmoid: return y * (1.0 - y);
  }
  return 1.0;
}

}  // namespace net_detail

inline ForwardTrace forward_trace(const NetParams& params, const NetConfig& config,
                                  std::span<const double> x) {
  if (x.size() != config.in_dim) {
    fail(ErrorCode::kDimensionMismatch, "forward: input dim " + std::to_string(x.size()) +
                                            ", net expects " + std::to_string(config.in_dim));
  }
  ForwardTrace trace;
  trace.values.reserve(params.layers.size() + 1);
  trace.values.emplace_back(x.begin(), x.end());
  for (std::size_t li = 0; li < params.layers.size(); ++li) {
    const auto& l = params.layers[li];
    const auto& in = trace.values.back();
    bool last = li + 1 == params.layers.size();
    Activation act = last ? config.output_activation : config.hidden_activation;
    std::vector<double> out(l.out);
    for (std::size_t r = 0; r < l.out; ++r) {
      double z = l.bias[r];
      const double* row = l.weight.data() + r * l.in;
      for (std::size_t c = 0; c < l.in; ++c) z += row[c] * in[c];
      out[r] = net_detail::activate(act, z);
    }
    if (last && act == Activation::kSigmoid) {
      for (auto& v : out) {
        double c = std::clamp(v, kProbEpsilon, 1.0 - kProbEpsilon);
        if (c != v) trace.clamped = true;
        v = c;
      }
    }
    trace.values.push_back(std::move(out));
  }
  return trace;
}

inline std::vector<double> forward(const NetParams& params, const NetConfig& config,
                                   std::span<const double> x) {
  auto trace = forward_trace(params, config, x);
  return std::move(trace.values.back());
}

/// Scalar head convenience (discriminator).
inline double forward_scalar(const NetParams& params, const NetConfig& config, std::span<const double> x) {
  return forward(params, config, x).front();
}

/// Reverse-mode pass: given dL/d(output), accumulates dL/d(params) into `grad`
/// and returns dL/d(input). A clamped sigmoid output has zero local gradient.
inline std::vector<double> backward_accumulate(const NetParams& params, const NetConfig& config,
                                               const ForwardTrace& trace, std::span<const double> grad_out,
                                               NetParams& grad) {
  std::vector<double> delta(grad_out.begin(), grad_out.end());
  for (std::size_t li = params.layers.size(); li-- > 0;) {
    const auto& l = params.layers[li];
    auto& g = grad.layers[li];
    const auto& in = trace.values[li];
    const auto& out = trace.values[li + 1];
    bool last = li + 1 == params.layers.size();
    Activation act = last ? config.output_activation : config.hidden_activation;
    for (std::size_t r = 0; r < l.out; ++r) {
      if (last && act == Activation::kSigmoid && trace.clamped) {
        delta[r] = 0.0;
      } else {
        delta[r] *= net_detail::activate_grad(act, out[r]);
      }
    }
    std::vector<double> delta_in(l.in, 0.0);
    for (std::size_t r = 0; r < l.out; ++r) {
      double d = delta[r];
      g.bias[r] += d;
      const double* row = l.weight.data() + r * l.in;
      double* grow = g.weight.data() + r * l.in;
      for (std::size_t c = 0; c < l.in; ++c) {
        grow[c] += d * in[c];
        delta_in[c] += row[c] * d;
      }
    }
    delta = std::move(delta_in);
  }
  return delta;
}

}  // namespace catchphrase
