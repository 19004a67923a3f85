#include <string>

#include <gtest/gtest.h>

#include "catchphrase/pipeline.hpp"
#include "test_util.hpp"

using namespace catchphrase;
using testutil::code_of;

TEST(PipelineConfig, JsonRoundTrip) {
  PipelineConfig c;
  c.log_level = "warn";
  c.paths.archive = "elsewhere";
  c.mine.classes = {"owl", "rain"};
  c.mine.article = ArticleMode::kHeuristic;
  c.selector.top_k = 7;
  c.train.hidden = {8, 4};
  c.train.optimizer = OptimizerKind::kSgd;
  c.synth.homograph_pairs = {{0, 1}, {2, 3}};
  c.ablation.n_seeds = 2;
  auto j = to_json(c);
  auto back = pipeline_from_json(j);
  EXPECT_EQ(to_json(back), j);
  EXPECT_EQ(back.paths.archive, "elsewhere");
  EXPECT_EQ(back.mine.article, ArticleMode::kHeuristic);
  EXPECT_EQ(back.train.hidden, (std::vector<std::size_t>{8, 4}));
}

TEST(PipelineConfig, DefaultsMatchLibraryStructs) {
  auto c = pipeline_from_json(to_json(PipelineConfig{}));
  EXPECT_EQ(to_json(c.train), to_json(TrainConfig{}));
  EXPECT_EQ(to_json(c.selector), to_json(SelectorConfig{}));
  EXPECT_EQ(to_json(c.synth), to_json(SynthConfig{}));
}

TEST(PipelineConfig, InvalidValuesRejected) {
  auto j = to_json(PipelineConfig{});
  j["train"]["lr"] = -1.0;
  EXPECT_EQ(code_of([&] { pipeline_from_json(j); }), ErrorCode::kInvalidConfig);
  j = to_json(PipelineConfig{});
  j["train"]["lr"] = "fast";
  EXPECT_EQ(code_of([&] { pipeline_from_json(j); }), ErrorCode::kInvalidConfig);
  j = to_json(PipelineConfig{});
  j["mine"]["article"] = "sometimes";
  EXPECT_EQ(code_of([&] { pipeline_from_json(j); }), ErrorCode::kInvalidConfig);
  j = to_json(PipelineConfig{});
  j["ablation"]["n_seeds"] = 0;
  EXPECT_EQ(code_of([&] { pipeline_from_json(j); }), ErrorCode::kInvalidConfig);
}

TEST(MergeStrict, OverwritesNestedKeys) {
  auto base = to_json(PipelineConfig{});
  merge_strict(base, json{{"train", {{"steps", 5}}}, {"log_level", "error"}});
  EXPECT_EQ(base["train"]["steps"], 5);
  EXPECT_EQ(base["train"]["lr"], TrainConfig{}.lr);
  EXPECT_EQ(base["log_level"], "error");
}

TEST(MergeStrict, RejectsUnknownKeys) {
  auto base = to_json(PipelineConfig{});
  EXPECT_EQ(code_of([&] { merge_strict(base, json{{"trian", {{"steps", 5}}}}); }), ErrorCode::kInvalidConfig);
  EXPECT_EQ(code_of([&] { merge_strict(base, json{{"train", {{"stpes", 5}}}}); }), ErrorCode::kInvalidConfig);
  EXPECT_EQ(code_of([&] { merge_strict(base, json::array()); }), ErrorCode::kInvalidConfig);
}

TEST(ApplyOverride, ParsesJsonValues) {
  auto j = to_json(PipelineConfig{});
  apply_override(j, "train.steps=12");
  apply_override(j, "train.hidden=[3,2]");
  apply_override(j, "selector.use_negative_term=false");
  EXPECT_EQ(j["train"]["steps"], 12);
  EXPECT_EQ(j["train"]["hidden"], json::array({3, 2}));
  EXPECT_EQ(j["selector"]["use_negative_term"], false);
}

TEST(ApplyOverride, FallsBackToString) {
  auto j = to_json(PipelineConfig{});
  apply_override(j, "paths.archive=my dir");
  apply_override(j, "train.optimizer=sgd");
  EXPECT_EQ(j["paths"]["archive"], "my dir");
  EXPECT_EQ(pipeline_from_json(j).train.optimizer, OptimizerKind::kSgd);
}

TEST(ApplyOverride, Errors) {
  auto j = to_json(PipelineConfig{});
  EXPECT_EQ(code_of([&] { apply_override(j, "train.nope=1"); }), ErrorCode::kInvalidConfig);
  EXPECT_EQ(code_of([&] { apply_override(j, "train.steps.x=1"); }), ErrorCode::kInvalidConfig);
  EXPECT_EQ(code_of([&] { apply_override(j, "train=1"); }), ErrorCode::kInvalidConfig);
  EXPECT_EQ(code_of([&] { apply_override(j, "no_equals"); }), ErrorCode::kInvalidConfig);
  EXPECT_EQ(code_of([&] { apply_override(j, "=3"); }), ErrorCode::kInvalidConfig);
}

TEST(ApplySeed, SetsEveryStage) {
  auto j = to_json(PipelineConfig{});
  apply_seed(j, 99);
  auto c = pipeline_from_json(j);
  EXPECT_EQ(c.selector.seed, 99u);
  EXPECT_EQ(c.train.seed, 99u);
  EXPECT_EQ(c.synth.seed, 99u);
  EXPECT_EQ(c.ablation.seed, 99u);
}

TEST(ConfigHash, StableAndSensitive) {
  auto a = to_json(PipelineConfig{});
  auto b = to_json(PipelineConfig{});
  EXPECT_EQ(config_hash(a), config_hash(b));
  apply_override(b, "train.steps=1001");
  EXPECT_NE(config_hash(a), config_hash(b));
  EXPECT_EQ(hex64(0xabcULL), "0000000000000abc");
  EXPECT_EQ(hex64(config_hash(a)).size(), 16u);
}

TEST(ConfigHash, Fnv1aOfDump) {
  // "{}" hashed by hand with the 64-bit FNV-1a constants.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : std::string("{}")) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  EXPECT_EQ(config_hash(json::object()), h);
}
