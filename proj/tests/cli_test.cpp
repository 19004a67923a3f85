#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "cli_app.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using catchphrase::cli::run_cli;
using testutil::TempDir;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Small synthetic world and a short training run.
std::vector<std::string> small(const std::string& sub, const fs::path& dir) {
  return {sub,
          "-o", dir.string(),
          "--set", "log_level=error",
          "--set", "synth.audio_per_class=12",
          "--set", "synth.prompts_per_class=3",
          "--set", "synth.dim_selector=16",
          "--set", "synth.dim_encoder_audio=8",
          "--set", "synth.dim_encoder_text=8",
          "--set", "train.steps=20",
          "--set", "train.batch_size=8",
          "--set", "train.hidden=[8]"};
}

}  // namespace

TEST(Cli, EndToEnd) {
  TempDir tmp("cli");
  for (const char* sub : {"synth", "filter", "retrieve", "train", "eval"}) {
    auto r = cli(small(sub, tmp.path()));
    ASSERT_EQ(r.code, 0) << sub << ": " << r.err;
    auto record = nlohmann::json::parse(slurp(tmp / "run.json"));
    EXPECT_EQ(record["subcommand"], sub);
    EXPECT_EQ(record["config_hash"].get<std::string>().size(), 16u);
    EXPECT_EQ(record["config"]["train"]["steps"], 20);
  }
  for (const char* f : {"archive", "filtered.json", "assignments.jsonl", "model.ckpt", "losses.csv",
                        "train_metrics.json", "metrics.json"}) {
    EXPECT_TRUE(fs::exists(tmp / f)) << f;
  }
  auto metrics = nlohmann::json::parse(slurp(tmp / "metrics.json"));
  EXPECT_TRUE(metrics.contains("alignment"));
  double r1 = metrics["recall_at_1"];
  EXPECT_GE(r1, 0.0);
  EXPECT_LE(r1, 1.0);
  auto train_metrics = nlohmann::json::parse(slurp(tmp / "train_metrics.json"));
  EXPECT_EQ(train_metrics["steps"], 20);
}

TEST(Cli, CheckpointEvery) {
  TempDir tmp("cli");
  for (const char* sub : {"synth", "filter", "retrieve"}) ASSERT_EQ(cli(small(sub, tmp.path())).code, 0);
  auto args = small("train", tmp.path());
  args.insert(args.end(), {"--ckpt-every", "10"});
  ASSERT_EQ(cli(args).code, 0);
  EXPECT_TRUE(fs::exists(tmp / "checkpoints" / "step_000010.ckpt"));
  EXPECT_TRUE(fs::exists(tmp / "checkpoints" / "step_000020.ckpt"));
}

TEST(Cli, SameSeedSameOutputs) {
  TempDir a("cli_a");
  TempDir b("cli_b");
  for (const auto* dir : {&a, &b}) {
    for (const char* sub : {"synth", "filter", "retrieve", "train"}) {
      auto args = small(sub, dir->path());
      args.insert(args.end(), {"--seed", "5"});
      ASSERT_EQ(cli(args).code, 0);
    }
  }
  for (const char* f : {"assignments.jsonl", "model.ckpt", "losses.csv"}) {
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
}

TEST(Cli, MissingArchiveIsDataError) {
  TempDir tmp("cli");
  auto r = cli({"filter", "-o", tmp.path().string(), "--set", "log_level=error"});
  EXPECT_EQ(r.code, catchphrase::cli::kExitData);
  EXPECT_NE(r.err.find((tmp / "archive").string()), std::string::npos) << r.err;
}

TEST(Cli, BadOverrideIsConfigError) {
  TempDir tmp("cli");
  EXPECT_EQ(cli({"synth", "-o", tmp.path().string(), "--set", "synth.nope=1"}).code, catchphrase::cli::kExitConfig);
  EXPECT_EQ(cli({"synth", "-o", tmp.path().string(), "--set", "train.lr=0"}).code, catchphrase::cli::kExitConfig);
  EXPECT_EQ(cli({"synth", "-o", tmp.path().string(), "--set", "log_level=loud"}).code,
            catchphrase::cli::kExitConfig);
  EXPECT_EQ(cli({"nosuchcommand"}).code, catchphrase::cli::kExitConfig);
  EXPECT_EQ(cli({}).code, catchphrase::cli::kExitConfig);
}

TEST(Cli, ConfigFile) {
  TempDir tmp("cli");
  std::ofstream(tmp / "cfg.json") << R"({"synth": {"n_classes": 2, "audio_per_class": 5,
      "homograph_pairs": [], "dim_selector": 8}, "log_level": "error"})";
  auto r = cli({"synth", "-c", (tmp / "cfg.json").string(), "-o", tmp.path().string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("synthesized 10 audio"), std::string::npos) << r.out;

  std::ofstream(tmp / "bad.json") << R"({"synth": {"n_clases": 2}})";
  EXPECT_EQ(cli({"synth", "-c", (tmp / "bad.json").string(), "-o", tmp.path().string()}).code,
            catchphrase::cli::kExitConfig);
  EXPECT_EQ(cli({"synth", "-c", (tmp / "missing.json").string(), "-o", tmp.path().string()}).code,
            catchphrase::cli::kExitConfig);
}

TEST(Cli, MineWritesQueries) {
  TempDir tmp("cli");
  auto r = cli({"mine", "-o", tmp.path().string(), "--set", "log_level=error", "--set",
                R"(mine.classes=["owl","rain"])"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto q = nlohmann::json::parse(slurp(tmp / "queries.json"));
  EXPECT_FALSE(q.empty());
  EXPECT_NE(r.out.find("2 class(es)"), std::string::npos);
}

TEST(Cli, AblateIsDeterministicAndReportRenders) {
  TempDir a("cli_a");
  TempDir b("cli_b");
  auto args = [](const fs::path& dir) {
    return std::vector<std::string>{"ablate", "--seed", "7", "-o", dir.string(),
                                    "--set", "log_level=error",
                                    "--set", "ablation.n_seeds=1",
                                    "--set", "ablation.train.steps=30",
                                    "--set", "ablation.train.hidden=[8]",
                                    "--set", "synth.audio_per_class=12",
                                    "--set", "synth.prompts_per_class=3",
                                    "--set", "synth.dim_selector=16",
                                    "--set", "synth.dim_encoder_audio=8",
                                    "--set", "synth.dim_encoder_text=8"};
  };
  auto ra = cli(args(a.path()));
  auto rb = cli(args(b.path()));
  ASSERT_EQ(ra.code, 0) << ra.err;
  ASSERT_EQ(rb.code, 0) << rb.err;
  EXPECT_EQ(ra.out, rb.out);
  EXPECT_EQ(slurp(a / "ablation.json"), slurp(b / "ablation.json"));
  EXPECT_EQ(slurp(a / "ablation.txt"), slurp(b / "ablation.txt"));
  EXPECT_NE(ra.out.find("seed 7"), std::string::npos) << ra.out;

  auto report = cli({"report", "-o", a.path().string(), "--set", "log_level=error"});
  ASSERT_EQ(report.code, 0) << report.err;
  EXPECT_EQ(report.out, slurp(a / "ablation.txt"));
}

TEST(Cli, ReportOfCorruptDocument) {
  TempDir tmp("cli");
  std::ofstream(tmp / "ablation.json") << R"({"runs": 3})";
  auto r = cli({"report", "-o", tmp.path().string(), "--set", "log_level=error"});
  EXPECT_EQ(r.code, catchphrase::cli::kExitData);
}
