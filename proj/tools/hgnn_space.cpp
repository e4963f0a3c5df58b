// hgnn-space: design-space description, sampling, experiment runs and
// post-hoc analysis from the command line.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "hgnn/analysis.hpp"
#include "hgnn/common.hpp"
#include "hgnn/designspace.hpp"
#include "hgnn/runner.hpp"
#include "hgnn/synthetic.hpp"
#include "hgnn/transform.hpp"

namespace fs = std::filesystem;
using namespace hgnn;

namespace {

std::vector<TrialRecord> load_records(const std::vector<std::string>& files) {
  std::vector<TrialRecord> all;
  for (const auto& f : files) {
    auto rf = read_results(f);
    if (rf.corrupt_lines) std::cerr << f << ": skipped " << rf.corrupt_lines << " malformed line(s)\n";
    for (auto& r : rf.records) all.push_back(std::move(r));
  }
  return all;
}

MetaPath parse_metapath_arg(const std::string& arg) {
  const auto eq = arg.find('=');
  if (eq == std::string::npos || eq == 0) throw Error("--metapath expects name=rel1,rel2,..., got '" + arg + "'");
  MetaPath mp{arg.substr(0, eq), {}};
  for (const auto& r : split(arg.substr(eq + 1), ','))
    if (auto t = trim(r); !t.empty()) mp.relations.push_back(t);
  return mp;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Heterogeneous GNN design-space explorer"};
  app.require_subcommand(1);

  // space ------------------------------------------------------------------
  auto* space_cmd = app.add_subcommand("space", "Inspect and sample the design space");
  space_cmd->require_subcommand(1);
  std::string space_name = "full";

  auto* describe = space_cmd->add_subcommand("describe", "List dimensions and their choices");
  describe->add_option("--space", space_name, "full or condensed")->check(CLI::IsMember({"full", "condensed"}));

  std::string card_space;
  auto* cardinality = space_cmd->add_subcommand("cardinality", "Exact number of configurations");
  cardinality->add_option("--space", card_space, "full or condensed (default: both)")
      ->check(CLI::IsMember({"full", "condensed"}));

  std::size_t sample_n = 264;
  std::uint64_t sample_seed = 0;
  std::size_t sample_hits = 2;
  std::string sample_space = "condensed";
  std::string sample_out;
  auto* sample = space_cmd->add_subcommand("sample", "Controlled random sample of configurations");
  sample->add_option("--n", sample_n, "number of configurations");
  sample->add_option("--seed", sample_seed, "master seed");
  sample->add_option("--strata-hits", sample_hits, "minimum hits per (family, micro) cell");
  sample->add_option("--space", sample_space, "full or condensed")->check(CLI::IsMember({"full", "condensed"}));
  sample->add_option("--out", sample_out, "directory for config_NNNN.cfg files (default: stdout)");

  // run --------------------------------------------------------------------
  std::string plan_path;
  std::size_t parallelism = 0;
  bool resume = false;
  auto* run = app.add_subcommand("run", "Execute an experiment plan");
  run->add_option("--plan", plan_path, "plan file (key = value)")->required()->check(CLI::ExistingFile);
  run->add_option("--parallelism", parallelism, "concurrent trials (HGNN_SPACE_THREADS overrides)");
  run->add_flag("--resume", resume, "complete a partial results file of the same plan");

  // analyze ----------------------------------------------------------------
  auto* analyze = app.add_subcommand("analyze", "Post-hoc analysis of results");
  analyze->require_subcommand(1);
  std::string rank_dim;
  std::vector<std::string> rank_results;
  std::string rank_out = "report";
  auto* rank = analyze->add_subcommand("rank", "Average rank of each choice of a dimension");
  rank->add_option("--dim", rank_dim, "dimension name")->required();
  rank->add_option("--results", rank_results, "results file(s)")->required()->check(CLI::ExistingFile);
  rank->add_option("--out", rank_out, "report directory");

  std::vector<std::string> edf_results;
  std::string edf_out = "report";
  auto* edf_cmd = analyze->add_subcommand("edf", "Empirical distribution of scores per results file");
  edf_cmd->add_option("--results", edf_results, "results files, one curve each")->required()->check(CLI::ExistingFile);
  edf_cmd->add_option("--out", edf_out, "report directory");

  std::string homo_graph;
  std::vector<std::string> homo_metapaths;
  bool include_self = false;
  auto* homophily_cmd = analyze->add_subcommand("homophily", "Label homophily of meta-path subgraphs");
  homophily_cmd->add_option("--graph", homo_graph, "graph bundle directory")->required()->check(CLI::ExistingDirectory);
  homophily_cmd->add_option("--metapath", homo_metapaths, "name=rel1,rel2,... (repeatable)")->required();
  homophily_cmd->add_flag("--include-self", include_self, "count u == v path endpoints as neighbours");

  // graph ------------------------------------------------------------------
  auto* graph_cmd = app.add_subcommand("graph", "Graph bundle utilities");
  graph_cmd->require_subcommand(1);
  std::string synth_out;
  std::size_t papers = 1000, authors = 1000, edges = 6000;
  double boost = 0.9;
  std::uint64_t synth_seed = 0;
  auto* synth = graph_cmd->add_subcommand("synth", "Write a planted-partition paper/author graph");
  synth->add_option("--out", synth_out, "bundle directory")->required();
  synth->add_option("--papers", papers, "paper nodes");
  synth->add_option("--authors", authors, "author nodes");
  synth->add_option("--edges", edges, "writes edges");
  synth->add_option("--boost", boost, "intra-community edge probability");
  synth->add_option("--seed", synth_seed, "generator seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*describe) {
      const auto space = space_by_name(space_name);
      for (const auto& d : space.dimensions()) {
        std::cout << d.name << ":";
        for (const auto& c : d.choices) std::cout << ' ' << c;
        if (d.conditional()) {
          std::cout << "  (when " << d.depends_on << " in";
          for (const auto& e : d.enabled_by) std::cout << ' ' << e;
          std::cout << ")";
        }
        std::cout << '\n';
      }
      std::cout << "cardinality: " << space.cardinality() << '\n';
    } else if (*cardinality) {
      if (!card_space.empty()) {
        std::cout << space_by_name(card_space).cardinality() << '\n';
      } else {
        const auto full = full_space().cardinality();
        const auto condensed = condensed_space().cardinality();
        std::cout << "full " << full << "\ncondensed " << condensed << "\nratio "
                  << format_decimal(static_cast<double>(full) / static_cast<double>(condensed)) << '\n';
      }
    } else if (*sample) {
      const auto space = space_by_name(sample_space);
      const auto configs = sample_controlled(space, sample_n, family_micro_strata(space, sample_hits), sample_seed);
      if (!sample_out.empty()) fs::create_directories(sample_out);
      for (std::size_t i = 0; i < configs.size(); ++i) {
        ConfigMap kv;
        const auto full = to_kv(configs[i]);
        for (const auto& d : space.dimensions())
          if (auto it = full.find(d.name); it != full.end()) kv.insert(*it);
        kv["seed"] = std::to_string(derive_seed(sample_seed, i));
        if (sample_out.empty()) {
          std::cout << "# config " << i << '\n' << format_kv(kv) << '\n';
          continue;
        }
        char name[32];
        std::snprintf(name, sizeof(name), "config_%04zu.cfg", i);
        std::ofstream out(fs::path(sample_out) / name);
        if (!out) throw Error("cannot write " + (fs::path(sample_out) / name).string());
        out << format_kv(kv);
      }
      if (!sample_out.empty()) std::cout << "wrote " << configs.size() << " configs to " << sample_out << '\n';
    } else if (*run) {
      const auto plan = read_plan(plan_path);
      RunOptions opts;
      opts.parallelism = parallelism;
      opts.resume = resume;
      const auto summary = run_plan(plan, opts);
      std::cout << summary.output.string() << ": " << summary.total << " trials, " << summary.executed
                << " executed, " << summary.failed << " failed\n";
    } else if (*rank) {
      const auto table = rank_choices(load_records(rank_results), rank_dim);
      emit_report({table}, {}, rank_out);
      std::cout << ranking_csv(table);
    } else if (*edf_cmd) {
      std::vector<EdfCurve> curves;
      for (const auto& f : edf_results) curves.push_back(edf_from_records(load_records({f}), fs::path(f).stem().string()));
      emit_report({}, curves, edf_out);
      std::cout << edf_csv(curves);
    } else if (*homophily_cmd) {
      const auto g = load_graph(homo_graph);
      std::cout << "metapath,beta\n";
      for (const auto& arg : homo_metapaths) {
        const auto mp = parse_metapath_arg(arg);
        const auto sub = compose_metapath(g, mp);
        const auto t = g.type_index(sub.dst_type);
        if (!g.has_labels(t)) throw Error("node type '" + sub.dst_type + "' has no labels");
        std::cout << mp.name << ',' << format_decimal(homophily(sub, g.labels(t), {include_self})) << '\n';
      }
    } else if (*synth) {
      const auto g = generate_synthetic(academic_spec(papers, authors, edges, boost, synth_seed));
      save_graph(g, synth_out);
      std::cout << "wrote " << g.num_nodes() << " nodes to " << synth_out << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
