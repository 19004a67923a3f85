// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "catchphrase/evalbench.hpp"
#include "catchphrase/gradcheck.hpp"
#include "catchphrase/log.hpp"
#include "catchphrase/objectives.hpp"
#include "catchphrase/selector.hpp"
#include "cli_app.hpp"
#include "oracles.hpp"

using namespace catchphrase;
namespace fs = std::filesystem;

namespace {

// Tolerances and budgets.
constexpr double kScoreTol = 1e-9;
constexpr std::size_t kSelectorInstances = 100;
constexpr double kSelectorBudgetS = 10.0;
constexpr double kFixtureTol = 1e-6;
constexpr double kGradTol = 1e-4;
constexpr double kGradStep = 1e-5;
constexpr double kGradFloor = 1e-6;
constexpr std::size_t kGradSeeds = 10;
constexpr double kGradBudgetS = 30.0;
constexpr std::size_t kAblationSeeds = 5;
constexpr std::size_t kFrFirstMin = 4;
constexpr std::size_t kFrBeatsBaselineMin = 5;
constexpr std::size_t kNegTermMin = 4;
constexpr double kAblationBudgetS = 300.0;

int failures = 0;

void report(const std::string& name, bool ok, const std::string& detail) {
  std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void selector_oracle() {
  auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2024);
  std::size_t mismatches = 0;
  double worst = 0.0;
  for (std::size_t t = 0; t < kSelectorInstances; ++t) {
    auto ds = oracle::random_instance(rng);
    auto pool = exprompt_pool(ds);
    SelectorConfig cfg;
    cfg.top_k = 1 + rng() % 8;
    cfg.use_negative_term = rng() % 4 != 0;
    cfg.seed = rng();
    auto subset = sample_audio_subset(ds, cfg);
    auto got = filter_topk(score_filter(subset, pool, cfg), pool, cfg);
    auto want = oracle::filter(subset, pool.prompts, cfg.top_k, cfg.use_negative_term);
    if (got.per_class.size() != want.size()) {
      ++mismatches;
      continue;
    }
    for (const auto& [label, bucket] : want) {
      const auto* g = got.bucket(label);
      if (g == nullptr || g->size() != bucket.size()) {
        ++mismatches;
        continue;
      }
      for (std::size_t i = 0; i < bucket.size(); ++i) {
        if ((*g)[i].prompt.id != bucket[i].id) ++mismatches;
        worst = std::max(worst, std::abs((*g)[i].score - bucket[i].score));
      }
    }
    for (const auto& a : ds.audio) {
      const auto* bucket = got.bucket(a.class_label);
      if (bucket == nullptr) continue;
      std::vector<double> sims;
      for (const auto& e : *bucket) {
        sims.push_back(oracle::cosine(oracle::widen(a.selector_emb), oracle::widen(e.prompt.selector_emb)));
      }
      auto best = oracle::argmax_first(sims);
      auto r = retrieve_top1(a, got);
      if (r.bucket_index != best || r.prompt.id != (*bucket)[best].prompt.id) ++mismatches;
      worst = std::max(worst, std::abs(r.score - sims[best]));
    }
  }
  double secs = seconds_since(t0);
  report("selector_oracle_equivalence", mismatches == 0 && worst <= kScoreTol && secs < kSelectorBudgetS,
         fmt::format("{} instances, {} id/order mismatches, max score error {:.3g} (tol {}), {:.2f} s (budget {} s)",
                     kSelectorInstances, mismatches, worst, kScoreTol, secs, kSelectorBudgetS));
}

void loss_fixtures() {
  std::vector<double> half{0.5};
  double adv = loss_adv(half, half);
  double want_adv = -1.3862944;

  InfoNceBatch sym{{1, 0}, {0, 1}, std::vector<std::vector<double>>(8, {0, -1}), 0.8};
  double nce = loss_infonce(sym);
  double want_nce = 2.1972246;

  double total = loss_total({1, 1, 1, 1}, LossWeights{});

  report("loss_adv_fixture", std::abs(adv - want_adv) <= kFixtureTol,
         fmt::format("loss_adv(0.5, 0.5) = {:.9f}, expected {} +- {}", adv, want_adv, kFixtureTol));
  report("infonce_symmetric_fixture", std::abs(nce - want_nce) <= kFixtureTol,
         fmt::format("M_neg = 8, value {:.9f}, expected ln 9 = {} +- {}", nce, want_nce, kFixtureTol));
  report("loss_total_fixture", total == 20001.5,
         fmt::format("unit components with default weights give {}, expected 20001.5 exactly", total));
}

void gradient_check() {
  auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  std::size_t widest = 0;
  for (std::uint64_t seed = 1; seed <= kGradSeeds; ++seed) {
    std::mt19937_64 rng(seed);
    std::size_t a_dim = 2 + rng() % 15;
    std::size_t t_dim = 2 + rng() % 15;
    std::vector<std::size_t> hidden{1 + rng() % 32};
    if (rng() % 2) hidden.push_back(1 + rng() % 32);
    for (auto h : hidden) widest = std::max(widest, h);
    auto model = make_model(a_dim, t_dim, hidden, Activation::kTanh, seed);
    auto batch = oracle::random_batch(rng, a_dim, t_dim, 2 + rng() % 6);
    ObjectiveConfig cfg;
    // Unit weights keep |L| small enough for the h = 1e-5 difference to resolve.
    cfg.weights = {1.0, 1.0, 1.0, 0.5};
    cfg.non_saturating = seed % 3 == 0;
    auto analytic = backward(model, batch, cfg).grad;
    auto numeric = finite_diff_grad(model, batch, cfg, kGradStep);
    worst = std::max(worst, max_relative_error(analytic, numeric, kGradFloor));
  }
  double secs = seconds_since(t0);
  report("gradient_check", worst < kGradTol && secs < kGradBudgetS,
         fmt::format("{} seeds, widest layer {}, h = {}, max relative error {:.3g} (tol {}), {:.2f} s (budget {} s)",
                     kGradSeeds, widest, kGradStep, worst, kGradTol, secs, kGradBudgetS));
}

void noiseless_retrieval() {
  double worst = 1.0;
  std::size_t runs = 0;
  for (bool homographs : {true, false}) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      SynthConfig c;
      c.noise_sigma = 0.0;
      c.illusion_rate = 0.0;
      c.seed = seed;
      if (!homographs) c.homograph_pairs.clear();
      auto ds = gen_synthetic(c);
      auto as = retrieve_all(ds.audio, run_filter(ds, exprompt_pool(ds), SelectorConfig{}));
      worst = std::min(worst, recall_at_1(as, ground_truth(ds.audio)));
      ++runs;
    }
  }
  report("noiseless_recall_at_1", worst == 1.0, fmt::format("lowest R@1 over {} worlds = {}", runs, worst));
}

// Runs `ablate` through the CLI entry point; returns the ablation.json bytes.
std::string run_ablate(const fs::path& dir, std::string* table) {
  std::ostringstream out, err;
  int code = cli::run_cli({"ablate", "-o", dir.string(), "--set", "log_level=warn"}, out, err);
  if (code != cli::kExitOk) {
    std::fprintf(stderr, "ablate exited %d: %s\n", code, err.str().c_str());
    return {};
  }
  if (table != nullptr) *table = slurp(dir / "ablation.txt");
  return slurp(dir / "ablation.json");
}

void ablation(const fs::path& scratch) {
  auto t0 = std::chrono::steady_clock::now();
  std::string table_a;
  auto doc_a = run_ablate(scratch / "a", &table_a);
  double secs = seconds_since(t0);
  if (doc_a.empty()) {
    report("ablation_direction", false, "ablate failed");
    return;
  }
  std::fputs(table_a.c_str(), stdout);

  std::vector<AblationReport> reports;
  auto parsed = nlohmann::json::parse(doc_a);
  for (const auto& run : parsed.at("runs")) reports.push_back(ablation_from_json(run));

  std::size_t fr_first = 0;
  std::size_t fr_beats = 0;
  std::size_t untrained_below = 0;
  for (const auto& r : reports) {
    double fr = r.row(Variant::kExpromptFR).alignment;
    bool first = true;
    for (const auto& row : r.rows) first = first && (row.variant == Variant::kExpromptFR || row.alignment < fr);
    fr_first += first ? 1 : 0;
    fr_beats += fr > r.row(Variant::kBaselineTemplate).alignment ? 1 : 0;
    untrained_below += std::abs(r.untrained_alignment) < fr ? 1 : 0;
  }
  bool seeds_ok = reports.size() == kAblationSeeds;
  report("ablation_direction",
         seeds_ok && fr_first >= kFrFirstMin && fr_beats >= kFrBeatsBaselineMin && secs < kAblationBudgetS,
         fmt::format("{} seeds; FR highest on {} (need {}), FR above template baseline on {} (need {}); "
                     "{:.1f} s (budget {} s)",
                     reports.size(), fr_first, kFrFirstMin, fr_beats, kFrBeatsBaselineMin, secs, kAblationBudgetS));
  report("untrained_below_trained", seeds_ok && untrained_below == reports.size(),
         fmt::format("|untrained| < trained FR on {}/{} seeds", untrained_below, reports.size()));

  // Same seeds and config as the ablation run, FR only, negative term off.
  PipelineConfig defaults;
  std::size_t neg_helps = 0;
  std::string pairs;
  for (const auto& r : reports) {
    auto synth = defaults.synth;
    synth.seed = r.seed;
    auto cfg = defaults.ablation.base;
    cfg.selector.seed = r.seed;
    cfg.train.seed = r.seed;
    cfg.pairing_seed = r.seed;
    cfg.selector.use_negative_term = false;
    auto split = split_dataset(gen_synthetic(synth), cfg.test_every);
    double without = run_variant(split, cfg, Variant::kExpromptFR).alignment;
    double with = r.row(Variant::kExpromptFR).alignment;
    neg_helps += without <= with ? 1 : 0;
    pairs += fmt::format(" {:.4f}/{:.4f}", without, with);
  }
  report("negative_term_direction", seeds_ok && neg_helps >= kNegTermMin,
         fmt::format("without <= with on {}/{} seeds (need {}); without/with:{}", neg_helps, reports.size(),
                     kNegTermMin, pairs));

  std::string table_b;
  auto doc_b = run_ablate(scratch / "b", &table_b);
  report("ablate_determinism", !doc_b.empty() && doc_a == doc_b && table_a == table_b,
         fmt::format("two runs: json {} ({} bytes), table {}", doc_a == doc_b ? "identical" : "differ",
                     doc_a.size(), table_a == table_b ? "identical" : "differ"));
}

}  // namespace

int main() {
  auto t0 = std::chrono::steady_clock::now();
  logger()->set_level(spdlog::level::warn);
  auto scratch = fs::temp_directory_path() / "catchphrase_acceptance";
  fs::remove_all(scratch);
  fs::create_directories(scratch);

  try {
    selector_oracle();
    loss_fixtures();
    gradient_check();
    noiseless_retrieval();
    ablation(scratch);
  } catch (const std::exception& e) {
    report("suite", false, std::string("unexpected exception: ") + e.what());
  }

  fs::remove_all(scratch);
  std::printf("%d failure(s), %.1f s\n", failures, seconds_since(t0));
  return failures == 0 ? 0 : 1;
}
