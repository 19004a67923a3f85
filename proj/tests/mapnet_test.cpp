#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "catchphrase/mapnet.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace catchphrase;
using testutil::code_of;

namespace {

// Straight-line reference forward over the same parameter layout.
std::vector<double> reference_forward(const NetParams& p, const NetConfig& c, std::vector<double> x) {
  for (std::size_t li = 0; li < p.layers.size(); ++li) {
    const auto& l = p.layers[li];
    bool last = li + 1 == p.layers.size();
    std::vector<double> y(l.out);
    for (std::size_t r = 0; r < l.out; ++r) {
      long double z = l.bias[r];
      for (std::size_t k = 0; k < l.in; ++k) z += static_cast<long double>(l.weight[r * l.in + k]) * x[k];
      double zd = static_cast<double>(z);
      Activation a = last ? c.output_activation : c.hidden_activation;
      if (a == Activation::kTanh) zd = std::tanh(zd);
      if (a == Activation::kRelu) zd = std::max(zd, 0.0);
      if (a == Activation::kSigmoid) zd = std::clamp(1.0 / (1.0 + std::exp(-zd)), 1e-7, 1.0 - 1e-7);
      y[r] = zd;
    }
    x = std::move(y);
  }
  return x;
}

}  // namespace

TEST(InitParams, DeterministicPerSeed) {
  auto cfg = mapper_config(6, 4, {8, 5});
  EXPECT_EQ(init_params(cfg, 3), init_params(cfg, 3));
  EXPECT_NE(init_params(cfg, 3), init_params(cfg, 4));
}

TEST(InitParams, EmptyHiddenIsSingleAffineLayer) {
  auto p = init_params(mapper_config(5, 3, {}), 1);
  ASSERT_EQ(p.layers.size(), 1u);
  EXPECT_EQ(p.layers[0].in, 5u);
  EXPECT_EQ(p.layers[0].out, 3u);
  EXPECT_EQ(p.size(), 5u * 3u + 3u);
}

TEST(InitParams, GlorotBoundsAndZeroBias) {
  auto cfg = mapper_config(7, 9, {16, 11});
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    auto p = init_params(cfg, seed);
    for (const auto& l : p.layers) {
      double a = std::sqrt(6.0 / static_cast<double>(l.in + l.out));
      for (double w : l.weight) ASSERT_LT(std::abs(w), a);
      for (double b : l.bias) ASSERT_EQ(b, 0.0);
    }
  }
}

TEST(NetConfig, Validation) {
  NetConfig c = mapper_config(0, 3);
  EXPECT_EQ(code_of([&] { c.validate(); }), ErrorCode::kInvalidConfig);
  c = mapper_config(2, 3, {4, 0});
  EXPECT_EQ(code_of([&] { c.validate(); }), ErrorCode::kInvalidConfig);
  c = mapper_config(2, 3);
  c.output_activation = Activation::kSigmoid;
  EXPECT_EQ(code_of([&] { c.validate(); }), ErrorCode::kInvalidConfig);
  c = mapper_config(2, 3);
  c.hidden_activation = Activation::kIdentity;
  EXPECT_EQ(code_of([&] { c.validate(); }), ErrorCode::kInvalidConfig);
  EXPECT_EQ(parse_activation("relu"), Activation::kRelu);
  EXPECT_EQ(code_of([] { parse_activation("gelu"); }), ErrorCode::kInvalidConfig);
}

TEST(NetConfig, ShapeContract) {
  EXPECT_EQ(mapper_config(6, 4).widths(), (std::vector<std::size_t>{6, 256, 256, 4}));
  EXPECT_EQ(decoder_config(4, 6).widths(), (std::vector<std::size_t>{4, 256, 256, 6}));
  auto d = discriminator_config(4);
  EXPECT_EQ(d.widths().back(), 1u);
  EXPECT_EQ(d.output_activation, Activation::kSigmoid);
}

TEST(Forward, NullNetGivesZero) {
  auto cfg = mapper_config(3, 4, {5});
  auto p = zero_params(cfg);
  std::vector<double> x{1, -2, 3};
  EXPECT_EQ(forward(p, cfg, x), (std::vector<double>(4, 0.0)));
}

TEST(Forward, ZeroDiscriminatorIsHalf) {
  auto cfg = discriminator_config(3, {4});
  std::vector<double> x{0.3, 1, -7};
  EXPECT_EQ(forward_scalar(zero_params(cfg), cfg, x), 0.5);
}

TEST(Forward, IdentityLayer) {
  auto cfg = mapper_config(3, 3, {});
  auto p = zero_params(cfg);
  for (std::size_t i = 0; i < 3; ++i) p.layers[0].weight[i * 3 + i] = 1.0;
  std::vector<double> x{0.25, -1.5, 4};
  EXPECT_EQ(forward(p, cfg, x), x);
}

TEST(Forward, DimensionMismatch) {
  auto cfg = mapper_config(3, 2, {4});
  std::vector<double> x{1, 2};
  EXPECT_EQ(code_of([&] { forward(zero_params(cfg), cfg, x); }), ErrorCode::kDimensionMismatch);
}

TEST(Forward, MatchesReferenceAndIsPure) {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 100; ++t) {
    std::size_t in = 1 + rng() % 9;
    std::size_t out = 1 + rng() % 9;
    std::vector<std::size_t> hidden;
    for (std::size_t h = rng() % 3; h > 0; --h) hidden.push_back(1 + rng() % 12);
    NetConfig cfg = mapper_config(in, out, hidden);
    if (t % 3 == 1) cfg.hidden_activation = Activation::kRelu;
    if (t % 3 == 2) cfg = discriminator_config(in, hidden);
    auto p = init_params(cfg, t);
    auto x = oracle::random_vector(rng, in);
    auto y1 = forward(p, cfg, x);
    auto y2 = forward(p, cfg, x);
    EXPECT_EQ(y1, y2);
    auto ref = reference_forward(p, cfg, x);
    ASSERT_EQ(y1.size(), ref.size());
    for (std::size_t i = 0; i < y1.size(); ++i) EXPECT_NEAR(y1[i], ref[i], 1e-12);
  }
}

TEST(Forward, DiscriminatorOutputClamped) {
  auto cfg = discriminator_config(2, {});
  auto p = zero_params(cfg);
  p.layers[0].weight = {1e3, 0};
  std::vector<double> big{1, 0};
  std::vector<double> small{-1, 0};
  EXPECT_EQ(forward_scalar(p, cfg, big), 1.0 - 1e-7);
  EXPECT_EQ(forward_scalar(p, cfg, small), 1e-7);
  EXPECT_TRUE(forward_trace(p, cfg, big).clamped);

  std::mt19937_64 rng(2);
  auto wide = discriminator_config(4, {6});
  for (int t = 0; t < 200; ++t) {
    auto q = init_params(wide, t);
    q.for_each([](double& v) { v *= 40.0; });
    double d = forward_scalar(q, wide, oracle::random_vector(rng, 4));
    EXPECT_GE(d, 1e-7);
    EXPECT_LE(d, 1.0 - 1e-7);
  }
}

TEST(NetParams, FlattenAssignRoundTrip) {
  auto p = init_params(mapper_config(4, 3, {5}), 9);
  auto flat = p.flatten();
  EXPECT_EQ(flat.size(), p.size());
  auto q = zeros_like(p);
  q.assign(flat);
  EXPECT_EQ(q, p);
  flat.pop_back();
  EXPECT_EQ(code_of([&] { q.assign(flat); }), ErrorCode::kDimensionMismatch);
}

TEST(Backward, LinearLayerGradient) {
  // y = Wx + b with dL/dy = g: dW = g x^T, db = g, dx = W^T g.
  auto cfg = mapper_config(2, 2, {});
  auto p = zero_params(cfg);
  p.layers[0].weight = {1, 2, 3, 4};
  std::vector<double> x{0.5, -1};
  std::vector<double> g{1, 10};
  auto trace = forward_trace(p, cfg, x);
  auto grad = zeros_like(p);
  auto dx = backward_accumulate(p, cfg, trace, g, grad);
  EXPECT_EQ(grad.layers[0].weight, (std::vector<double>{0.5, -1, 5, -10}));
  EXPECT_EQ(grad.layers[0].bias, g);
  EXPECT_EQ(dx, (std::vector<double>{31, 42}));
}
