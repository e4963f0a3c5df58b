#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hgnn/designspace.hpp"
#include "hgnn/hgraph.hpp"
#include "hgnn/train.hpp"

namespace hgnn {

/// Parses flat `key = value` text. Blank lines and lines starting with # are
/// skipped; errors carry `origin:line`.
ConfigMap parse_kv_text(std::string_view text, const std::string& origin);
ConfigMap read_kv_file(const std::filesystem::path& path);
std::string format_kv(const ConfigMap& kv);

/// An experiment: which graph, which task, which configs, how many splits,
/// where the results go.
///
/// Plan keys: graph, task, target, reverse_relation, num_classes, negatives,
/// eval_negatives, space (full | condensed | explicit), configs (explicit
/// config files, comma-separated), n, strata_hits, seed, splits, parallelism,
/// output, epochs (overrides every config's epoch budget), perturb (dimension
/// whose choices expand each sampled config into a ranking setup),
/// attention_form, metapath.<name> = r1,r2,...
/// Relative paths resolve against the plan file's directory.
struct ExperimentPlan {
  std::filesystem::path graph;
  Task task;
  std::string space = "condensed";
  std::vector<std::filesystem::path> configs;
  std::size_t n = 264;
  std::size_t strata_hits = 2;
  std::uint64_t seed = 0;
  std::size_t splits = 3;
  std::size_t parallelism = 1;
  std::filesystem::path output;
  std::optional<int> epochs;
  std::string perturb;
  AttentionForm attention_form = AttentionForm::GAT;
  std::vector<MetaPath> metapaths;

  /// Keys as written (after path resolution); the plan hash covers them.
  ConfigMap entries;
};

ExperimentPlan parse_plan(std::string_view text, const std::filesystem::path& base_dir, const std::string& origin = "plan");
ExperimentPlan read_plan(const std::filesystem::path& file);

/// FNV-1a over the canonical plan entries, excluding parallelism and output.
std::uint64_t plan_hash(const ExperimentPlan& plan);

struct TrialSpec {
  std::size_t trial_id = 0;
  std::size_t config_id = 0;
  std::size_t split_id = 0;
  std::string setup;
  DesignConfig config;
};

/// Every trial of the plan, ordered by trial id = config_id * splits + split_id.
/// Config j of a sampled plan gets seed derive_seed(plan.seed, j); configs of
/// one perturbation setup share their base config's seed.
std::vector<TrialSpec> expand_plan(const ExperimentPlan& plan, const HeteroGraph& g);

/// Evaluates one trial; the default trains the model (train_trial).
using TrialFn = std::function<TrialRecord(const TrialSpec&, const HeteroGraph&, const Split&)>;
TrialFn training_evaluator(std::optional<int> epochs);

struct RunOptions {
  /// 0 = plan value. HGNN_SPACE_THREADS, when set, wins over both.
  std::size_t parallelism = 0;
  bool resume = false;
  TrialFn evaluator;  // empty = training_evaluator(plan.epochs)
};

struct RunSummary {
  std::size_t total = 0;
  std::size_t executed = 0;
  std::size_t failed = 0;
  std::filesystem::path output;
};

/// Runs every trial (or, with resume, the ones missing from the output) and
/// finalizes the results file: a header line followed by one record per
/// line, sorted by trial id. Per-trial wall times go to `<output>.timing`.
RunSummary run_plan(const ExperimentPlan& plan, RunOptions options = {});
/// Loads the plan's graph bundle.
HeteroGraph load_plan_graph(const ExperimentPlan& plan);

/// One trial of the plan in isolation.
TrialRecord run_single_trial(const ExperimentPlan& plan, std::size_t trial_id, const TrialFn& evaluator = {});

/// One-line record text (wall time excluded, so the line is reproducible).
std::string serialize_record(const TrialRecord& rec);
/// Throws Error on malformed input.
TrialRecord parse_record(std::string_view line);

struct ResultsFile {
  std::uint64_t plan_hash = 0;
  std::vector<TrialRecord> records;
  std::size_t corrupt_lines = 0;
};

/// Reads a results file; unparsable record lines are counted and skipped.
ResultsFile read_results(const std::filesystem::path& path);
std::string results_header(std::uint64_t plan_hash);

}  // namespace hgnn
