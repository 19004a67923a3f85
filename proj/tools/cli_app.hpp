#pragma once

// Batch driver behind the `catchphrase` executable. Kept in a header so the
// test suites can run subcommands in-process through run_cli().

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "catchphrase/archive.hpp"
#include "catchphrase/checkpoint.hpp"
#include "catchphrase/error.hpp"
#include "catchphrase/evalbench.hpp"
#include "catchphrase/log.hpp"
#include "catchphrase/pipeline.hpp"
#include "catchphrase/promptmine.hpp"
#include "catchphrase/rng.hpp"
#include "catchphrase/selector.hpp"
#include "catchphrase/trainer.hpp"
#include "catchphrase/version.hpp"

namespace catchphrase::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;

inline int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidConfig: return kExitConfig;
    case ErrorCode::kNonFiniteLoss: return kExitNumeric;
    default: return kExitData;
  }
}

struct CommonOptions {
  std::string config_file;
  std::vector<std::string> overrides;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
};

struct Context {
  PipelineConfig config;
  nlohmann::json effective;
  fs::path out_dir;
  std::ostream* out = nullptr;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;

  fs::path resolve(const std::string& p) const {
    fs::path path(p);
    return path.is_absolute() ? path : out_dir / path;
  }
  fs::path input(const std::string& p) {
    inputs.push_back(p);
    return resolve(p);
  }
  fs::path output(const std::string& p) {
    outputs.push_back(p);
    return resolve(p);
  }
};

inline Context load_context(const CommonOptions& opts, std::ostream& out) {
  auto effective = to_json(PipelineConfig{});
  if (!opts.config_file.empty()) {
    nlohmann::json user;
    try {
      user = archive_detail::read_json(opts.config_file);
    } catch (const Error& e) {
      // an unreadable or malformed config file is a configuration problem
      fail(ErrorCode::kInvalidConfig, e.what());
    }
    merge_strict(effective, user);
  }
  for (const auto& o : opts.overrides) apply_override(effective, o);
  if (opts.seed) apply_seed(effective, *opts.seed);

  Context ctx;
  ctx.config = pipeline_from_json(effective);
  ctx.effective = to_json(ctx.config);
  ctx.out_dir = opts.out_dir;
  ctx.out = &out;

  auto level = spdlog::level::from_str(ctx.config.log_level);
  if (level == spdlog::level::off && ctx.config.log_level != "off") {
    fail(ErrorCode::kInvalidConfig, "unknown log_level '" + ctx.config.log_level + "'");
  }
  logger()->set_level(level);

  std::error_code ec;
  fs::create_directories(ctx.out_dir, ec);
  if (ec) fail(ErrorCode::kIo, "cannot create output directory " + ctx.out_dir.string() + ": " + ec.message());
  return ctx;
}

inline void write_text(const fs::path& path, const std::string& text) {
  archive_detail::write_bytes(path, std::vector<char>(text.begin(), text.end()));
}

inline void write_run_record(Context& ctx, const std::string& subcommand) {
  const auto& c = ctx.config;
  nlohmann::json record{
      {"subcommand", subcommand},
      {"config_hash", hex64(config_hash(ctx.effective))},
      {"seeds", {{"selector", c.selector.seed}, {"train", c.train.seed}, {"synth", c.synth.seed},
                 {"ablation", c.ablation.seed}}},
      {"versions", {{"catchphrase", std::string(kLibraryVersion)},
                    {"archive_format", Manifest{}.version},
                    {"checkpoint_format", kCheckpointVersion},
                    {"rng", Pcg32::kVersion}}},
      {"inputs", ctx.inputs},
      {"outputs", ctx.outputs},
      {"config", ctx.effective}};
  archive_detail::write_json(ctx.resolve("run.json"), record);
}

inline std::vector<Assignment> read_assignments(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  return assignments_from_jsonl(in);
}

// --- subcommands ---------------------------------------------------------------

inline void cmd_mine(Context& ctx, const std::string& ingest) {
  const auto& c = ctx.config;
  if (!ingest.empty()) {
    auto ds = load_archive(ctx.input(c.paths.archive));
    auto staged = load_staged_prompts(ingest, ds.manifest);
    ctx.inputs.push_back(ingest);
    std::vector<PromptRecord> templates, class_level, instance_level;
    for (const auto& p : ds.prompts) {
      if (p.source == PromptSource::kTemplate) {
        templates.push_back(p);
      } else {
        (p.source == PromptSource::kAcm ? instance_level : class_level).push_back(p);
      }
    }
    for (const auto& p : staged) {
      if (p.source == PromptSource::kTemplate) {
        templates.push_back(p);
      } else {
        (p.source == PromptSource::kAcm ? instance_level : class_level).push_back(p);
      }
    }
    auto pool = assemble_pool(class_level, instance_level);
    ds.prompts = templates;
    ds.prompts.insert(ds.prompts.end(), pool.prompts.begin(), pool.prompts.end());
    validate(ds);
    save_archive(ds, ctx.output(c.paths.ingested_archive));
    *ctx.out << fmt::format("ingested {} staged prompt(s); pool holds {}\n", staged.size(), pool.prompts.size());
    return;
  }
  std::vector<std::string> classes = c.mine.classes;
  if (classes.empty()) classes = load_archive(ctx.input(c.paths.archive)).audio_classes();
  archive_detail::write_json(ctx.output(c.paths.queries), query_manifest(classes, c.mine.article));
  *ctx.out << fmt::format("wrote {} queries for {} class(es)\n", classes.size() * 9, classes.size());
}

inline void cmd_synth(Context& ctx) {
  auto ds = gen_synthetic(ctx.config.synth);
  save_archive(ds, ctx.output(ctx.config.paths.archive));
  *ctx.out << fmt::format("synthesized {} audio and {} prompts\n", ds.audio.size(), ds.prompts.size());
}

inline void cmd_filter(Context& ctx) {
  auto ds = load_archive(ctx.input(ctx.config.paths.archive));
  auto pool = exprompt_pool(ds);
  auto filtered = run_filter(ds, pool, ctx.config.selector);
  archive_detail::write_json(ctx.output(ctx.config.paths.filtered), to_json(filtered));
  std::size_t kept = 0;
  for (const auto& [label, bucket] : filtered.per_class) kept += bucket.size();
  *ctx.out << fmt::format("kept {} of {} prompts over {} class(es)\n", kept, pool.prompts.size(),
                          filtered.per_class.size());
}

inline void cmd_retrieve(Context& ctx) {
  auto ds = load_archive(ctx.input(ctx.config.paths.archive));
  auto pool = exprompt_pool(ds);
  auto filtered = filtered_pool_from_json(archive_detail::read_json(ctx.input(ctx.config.paths.filtered)), pool);
  auto assignments = retrieve_all(ds.audio, filtered);
  write_text(ctx.output(ctx.config.paths.assignments), to_jsonl(assignments));
  *ctx.out << fmt::format("assigned {} audio clip(s)\n", assignments.size());
}

inline void cmd_train(Context& ctx, std::size_t ckpt_every) {
  const auto& c = ctx.config;
  auto ds = load_archive(ctx.input(c.paths.archive));
  auto assignments = read_assignments(ctx.input(c.paths.assignments));
  TrainHooks hooks;
  if (ckpt_every > 0) {
    hooks.checkpoint_every = ckpt_every;
    fs::create_directories(ctx.resolve(c.paths.checkpoint_dir));
    hooks.on_checkpoint = [&](const ModelState& s) {
      auto name = (fs::path(c.paths.checkpoint_dir) / fmt::format("step_{:06d}.ckpt", s.step)).string();
      save_checkpoint(ctx.output(name), s.model, {c.train.seed, s.step});
    };
  }
  auto result = train(ds, assignments, c.train, hooks);
  save_checkpoint(ctx.output(c.paths.checkpoint), result.state.model, {c.train.seed, result.state.step});
  write_text(ctx.output(c.paths.losses), history_csv(result.history));
  nlohmann::json metrics{{"steps", result.state.step}, {"seed", c.train.seed}};
  if (!result.history.empty()) {
    const auto& last = result.history.back();
    metrics["final"] = {{"mse", last.components.mse},
                        {"rec", last.components.rec},
                        {"adv", last.components.adv},
                        {"infonce", last.components.infonce},
                        {"total", last.total}};
  }
  archive_detail::write_json(ctx.output(c.paths.train_metrics), metrics);
  *ctx.out << fmt::format("trained {} step(s)\n", result.state.step);
}

inline void cmd_eval(Context& ctx) {
  const auto& c = ctx.config;
  auto ds = load_archive(ctx.input(c.paths.archive));
  auto model = load_checkpoint(ctx.input(c.paths.checkpoint));
  nlohmann::json metrics{{"n_audio", ds.audio.size()}};
  bool has_truth = !ds.audio.empty();
  for (const auto& a : ds.audio) has_truth = has_truth && a.truth_prompt_id.has_value();
  if (has_truth) {
    auto truth = ground_truth(ds.audio);
    metrics["alignment"] = alignment_score(model, ds, truth, c.train.normalize_features);
    auto assignments_path = ctx.resolve(c.paths.assignments);
    if (fs::exists(assignments_path)) {
      ctx.inputs.push_back(c.paths.assignments);
      metrics["recall_at_1"] = recall_at_1(read_assignments(assignments_path), truth);
    }
  } else {
    logger()->warn("archive carries no ground truth; alignment and R@1 not computed");
  }
  archive_detail::write_json(ctx.output(c.paths.metrics), metrics);
  *ctx.out << metrics.dump(2) << "\n";
}

/// Multi-seed ablation: JSON with one report per seed plus the summary counts.
inline nlohmann::json ablation_document(const std::vector<AblationReport>& reports) {
  nlohmann::json runs = nlohmann::json::array();
  std::size_t fr_first = 0;
  std::size_t fr_beats_baseline = 0;
  for (const auto& r : reports) {
    runs.push_back(to_json(r));
    double fr = r.row(Variant::kExpromptFR).alignment;
    bool first = true;
    for (const auto& row : r.rows) {
      if (row.variant != Variant::kExpromptFR && row.alignment >= fr) first = false;
    }
    fr_first += first ? 1 : 0;
    fr_beats_baseline += fr > r.row(Variant::kBaselineTemplate).alignment ? 1 : 0;
  }
  return {{"runs", runs},
          {"summary", {{"n_seeds", reports.size()},
                       {"fr_highest", fr_first},
                       {"fr_beats_baseline", fr_beats_baseline}}}};
}

inline std::string ablation_text(const nlohmann::json& doc) {
  std::string out;
  try {
    for (const auto& run : doc.at("runs")) {
      auto r = ablation_from_json(run);
      out += fmt::format("seed {}\n", r.seed);
      out += format_table(r);
      out += "\n";
    }
    const auto& s = doc.at("summary");
    out += fmt::format("FR highest on {}/{} seeds; FR above template baseline on {}/{} seeds\n",
                       s.at("fr_highest").get<std::size_t>(), s.at("n_seeds").get<std::size_t>(),
                       s.at("fr_beats_baseline").get<std::size_t>(), s.at("n_seeds").get<std::size_t>());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kCorruptManifest, std::string("ablation document: ") + e.what());
  }
  return out;
}

inline void cmd_ablate(Context& ctx) {
  const auto& c = ctx.config;
  std::vector<AblationReport> reports;
  for (std::size_t i = 0; i < c.ablation.n_seeds; ++i) {
    std::uint64_t seed = c.ablation.seed + i;
    auto synth = c.synth;
    synth.seed = seed;
    auto cfg = c.ablation.base;
    cfg.selector.seed = seed;
    cfg.train.seed = seed;
    cfg.pairing_seed = seed;
    logger()->info("ablation seed {}", seed);
    reports.push_back(run_ablation(gen_synthetic(synth), cfg));
  }
  auto doc = ablation_document(reports);
  auto text = ablation_text(doc);
  archive_detail::write_json(ctx.output(c.paths.ablation_json), doc);
  write_text(ctx.output(c.paths.ablation_table), text);
  *ctx.out << text;
}

inline void cmd_report(Context& ctx) {
  auto doc = archive_detail::read_json(ctx.input(ctx.config.paths.ablation_json));
  *ctx.out << ablation_text(doc);
}

// --- entry point -----------------------------------------------------------------

inline int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  CLI::App app{"Embedding-level enriched-prompt selection and audio-to-text feature mapping", "catchphrase"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kLibraryVersion));

  CommonOptions opts;
  std::string ingest;
  std::size_t ckpt_every = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", opts.config_file, "JSON pipeline configuration");
    sub->add_option("--set", opts.overrides, "Override a config value: dotted.key=value");
    sub->add_option("-o,--out-dir", opts.out_dir, "Directory for all outputs and run.json");
    sub->add_option("--seed", opts.seed, "Seed for every stage");
  };

  auto* mine = app.add_subcommand("mine", "Write the LLM query manifest, or ingest staged prompts");
  add_common(mine);
  mine->add_option("--ingest", ingest, "Staged prompt JSON to merge into the archive's pool");
  add_common(app.add_subcommand("synth", "Generate a synthetic misalignment archive"));
  add_common(app.add_subcommand("filter", "Class-level prompt filtering"));
  add_common(app.add_subcommand("retrieve", "Instance-level prompt retrieval"));
  auto* train_cmd = app.add_subcommand("train", "Train the mapping network");
  add_common(train_cmd);
  train_cmd->add_option("--ckpt-every", ckpt_every, "Write a checkpoint every k steps");
  add_common(app.add_subcommand("eval", "Alignment score and R@1 of a trained checkpoint"));
  add_common(app.add_subcommand("ablate", "Five-variant pairing ablation on synthetic data"));
  add_common(app.add_subcommand("report", "Render a stored ablation report as a table"));

  std::vector<std::string> argv_store;
  argv_store.emplace_back("catchphrase");
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  auto* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  try {
    auto ctx = load_context(opts, out);
    if (name == "mine") {
      cmd_mine(ctx, ingest);
    } else if (name == "synth") {
      cmd_synth(ctx);
    } else if (name == "filter") {
      cmd_filter(ctx);
    } else if (name == "retrieve") {
      cmd_retrieve(ctx);
    } else if (name == "train") {
      cmd_train(ctx, ckpt_every);
    } else if (name == "eval") {
      cmd_eval(ctx);
    } else if (name == "ablate") {
      cmd_ablate(ctx);
    } else {
      cmd_report(ctx);
    }
    write_run_record(ctx, name);
  } catch (const Error& e) {
    err << fmt::format("catchphrase {}: {}: {}\n", name, to_string(e.code()), e.what());
    return exit_code_for(e.code());
  } catch (const nlohmann::json::exception& e) {
    err << fmt::format("catchphrase {}: malformed JSON: {}\n", name, e.what());
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    err << fmt::format("catchphrase {}: {}\n", name, e.what());
    return kExitData;
  }
  return kExitOk;
}

}  // namespace catchphrase::cli
