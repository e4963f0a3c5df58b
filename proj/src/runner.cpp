#include "hgnn/runner.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "hgnn/common.hpp"

namespace hgnn {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr std::uint64_t kSplitStream = 0x5b17;
constexpr std::string_view kMetapathPrefix = "metapath.";
constexpr std::string_view kResultsFormat = "hgnn-results/1";

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T v{};
  auto [end, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || end != value.data() + value.size() || value.empty())
    throw Error("plan: " + key + ": cannot parse '" + value + "'");
  return v;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path resolve(const fs::path& base, const std::string& value) {
  fs::path p(value);
  return (p.is_absolute() ? p : base / p).lexically_normal();
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double number_from(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

std::size_t thread_count(const ExperimentPlan& plan, const RunOptions& options) {
  if (const char* env = std::getenv("HGNN_SPACE_THREADS")) {
    std::size_t n = 0;
    const std::string_view text(env);
    auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), n);
    if (ec == std::errc() && end == text.data() + text.size() && n > 0) return n;
  }
  if (options.parallelism > 0) return options.parallelism;
  return std::max<std::size_t>(plan.parallelism, 1);
}

TrialRecord execute(const TrialSpec& spec, const HeteroGraph& g, const std::vector<Split>& splits,
                    const TrialFn& evaluator) {
  TrialRecord rec;
  try {
    rec = evaluator(spec, g, splits.at(spec.split_id));
  } catch (const std::exception& e) {
    rec = TrialRecord{};
    rec.config = to_kv(spec.config);
    rec.seed = spec.config.seed;
    rec.status = TrialStatus::Failed;
    rec.metric = spec.config.task.kind == TaskKind::NodeClassification ? "macro_f1" : "roc_auc";
    rec.score = std::numeric_limits<double>::quiet_NaN();
    rec.secondary = std::numeric_limits<double>::quiet_NaN();
    rec.error = e.what();
  }
  rec.trial_id = spec.trial_id;
  rec.config_id = spec.config_id;
  rec.split_id = spec.split_id;
  rec.setup = spec.setup;
  return rec;
}

void write_atomically(const fs::path& path, const std::string& content) {
  const auto tmp = fs::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << content;
    if (!out.flush()) throw Error("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string render_results(std::uint64_t hash, std::vector<TrialRecord> records) {
  std::stable_sort(records.begin(), records.end(),
                   [](const TrialRecord& a, const TrialRecord& b) { return a.trial_id < b.trial_id; });
  std::string out = results_header(hash) + "\n";
  std::set<std::size_t> seen;
  for (const auto& r : records) {
    if (!seen.insert(r.trial_id).second) continue;
    out += serialize_record(r);
    out += '\n';
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// key=value text

ConfigMap parse_kv_text(std::string_view text, const std::string& origin) {
  ConfigMap kv;
  std::size_t line_no = 0;
  for (const auto& raw : split(text, '\n')) {
    ++line_no;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(origin + ":" + std::to_string(line_no) + ": expected key = value, got '" + line + "'");
    auto key = trim(std::string_view(line).substr(0, eq));
    auto value = trim(std::string_view(line).substr(eq + 1));
    if (key.empty()) throw Error(origin + ":" + std::to_string(line_no) + ": empty key");
    if (kv.count(key)) throw Error(origin + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
    kv.emplace(std::move(key), std::move(value));
  }
  return kv;
}

ConfigMap read_kv_file(const fs::path& path) { return parse_kv_text(slurp(path), path.string()); }

std::string format_kv(const ConfigMap& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Plans

ExperimentPlan parse_plan(std::string_view text, const fs::path& base_dir, const std::string& origin) {
  ExperimentPlan plan;
  plan.entries = parse_kv_text(text, origin);
  for (const auto& [key, value] : plan.entries) {
    if (key == "graph") {
      plan.graph = resolve(base_dir, value);
    } else if (key == "task") {
      auto k = parse_task_kind(value);
      if (!k) throw Error("plan: task: expected node_classification or link_prediction, got '" + value + "'");
      plan.task.kind = *k;
    } else if (key == "target") {
      plan.task.target = value;
    } else if (key == "reverse_relation") {
      plan.task.reverse_relation = value;
    } else if (key == "num_classes") {
      plan.task.num_classes = parse_number<std::size_t>(key, value);
    } else if (key == "negatives") {
      plan.task.negatives = parse_number<std::size_t>(key, value);
    } else if (key == "eval_negatives") {
      plan.task.eval_negatives = parse_number<std::size_t>(key, value);
    } else if (key == "space") {
      if (value != "full" && value != "condensed" && value != "explicit")
        throw Error("plan: space: expected full, condensed or explicit, got '" + value + "'");
      plan.space = value;
    } else if (key == "configs") {
      for (const auto& item : split(value, ','))
        if (auto t = trim(item); !t.empty()) plan.configs.push_back(resolve(base_dir, t));
    } else if (key == "n") {
      plan.n = parse_number<std::size_t>(key, value);
    } else if (key == "strata_hits") {
      plan.strata_hits = parse_number<std::size_t>(key, value);
    } else if (key == "seed") {
      plan.seed = parse_number<std::uint64_t>(key, value);
    } else if (key == "splits") {
      plan.splits = parse_number<std::size_t>(key, value);
    } else if (key == "parallelism") {
      plan.parallelism = parse_number<std::size_t>(key, value);
    } else if (key == "output") {
      plan.output = resolve(base_dir, value);
    } else if (key == "epochs") {
      plan.epochs = parse_number<int>(key, value);
    } else if (key == "perturb") {
      plan.perturb = value;
    } else if (key == "attention_form") {
      auto f = parse_attention_form(value);
      if (!f) throw Error("plan: attention_form: expected GAT or SimpleHGN, got '" + value + "'");
      plan.attention_form = *f;
    } else if (key.starts_with(kMetapathPrefix)) {
      MetaPath mp{key.substr(kMetapathPrefix.size()), {}};
      for (const auto& r : split(value, ','))
        if (auto t = trim(r); !t.empty()) mp.relations.push_back(t);
      if (mp.name.empty() || mp.relations.empty()) throw Error("plan: " + key + ": meta-path needs a name and relations");
      plan.metapaths.push_back(std::move(mp));
    } else {
      throw Error("plan: unknown key '" + key + "'");
    }
  }
  if (plan.graph.empty()) throw Error("plan: graph is required");
  if (plan.task.target.empty()) throw Error("plan: target is required");
  if (plan.splits == 0) throw Error("plan: splits must be at least 1");
  if (plan.space == "explicit" && plan.configs.empty()) throw Error("plan: explicit space needs configs");
  if (plan.epochs && *plan.epochs < 0) throw Error("plan: epochs must be non-negative");
  if (!plan.perturb.empty() && plan.space != "explicit") space_by_name(plan.space).at(plan.perturb);
  if (plan.output.empty()) plan.output = (base_dir / "results.ndrec").lexically_normal();
  return plan;
}

ExperimentPlan read_plan(const fs::path& file) {
  auto base = file.parent_path();
  if (base.empty()) base = ".";
  return parse_plan(slurp(file), base, file.string());
}

std::uint64_t plan_hash(const ExperimentPlan& plan) {
  std::string canonical;
  for (const auto& [k, v] : plan.entries) {
    if (k == "parallelism" || k == "output") continue;
    canonical += k + "=" + v + "\n";
  }
  return hash_string(canonical);
}

HeteroGraph load_plan_graph(const ExperimentPlan& plan) { return load_graph(plan.graph); }

std::vector<TrialSpec> expand_plan(const ExperimentPlan& plan, const HeteroGraph& g) {
  DesignConfig base;
  base.task = plan.task;
  base.attention_form = plan.attention_form;
  base.metapaths = plan.metapaths;
  std::sort(base.metapaths.begin(), base.metapaths.end(),
            [](const MetaPath& a, const MetaPath& b) { return a.name < b.name; });

  std::vector<std::pair<std::string, DesignConfig>> configs;
  const auto validation_space = plan.space == "explicit" ? full_space() : space_by_name(plan.space);
  if (plan.space == "explicit") {
    auto template_kv = to_kv(base);
    for (const auto& d : validation_space.dimensions()) template_kv.erase(d.name);
    for (std::size_t i = 0; i < plan.configs.size(); ++i) {
      auto kv = read_kv_file(plan.configs[i]);
      for (const auto& [k, v] : template_kv) kv.emplace(k, v);
      if (!kv.count("seed")) kv["seed"] = std::to_string(derive_seed(plan.seed, i));
      configs.emplace_back("", from_kv(kv));
    }
  } else {
    const auto space = space_by_name(plan.space);
    auto bases = sample_controlled(space, plan.n, family_micro_strata(space, plan.strata_hits, plan.graph.filename().string()),
                                   plan.seed, base);
    for (std::size_t j = 0; j < bases.size(); ++j) {
      bases[j].seed = derive_seed(plan.seed, j);
      if (plan.perturb.empty()) {
        configs.emplace_back("", bases[j]);
        continue;
      }
      if (!space.applies(space.at(plan.perturb), to_kv(bases[j]))) continue;
      for (auto& c : perturb_dimension(space, bases[j], plan.perturb)) configs.emplace_back("s" + std::to_string(j), c);
    }
  }

  std::vector<TrialSpec> trials;
  trials.reserve(configs.size() * plan.splits);
  for (std::size_t i = 0; i < configs.size(); ++i) {
    if (auto errors = validate(configs[i].second, validation_space, &g); !errors.empty()) {
      std::string msg;
      for (const auto& e : errors) msg += (msg.empty() ? "" : "; ") + e;
      throw Error("plan: config " + std::to_string(i) + " is invalid: " + msg);
    }
    for (std::size_t k = 0; k < plan.splits; ++k)
      trials.push_back({i * plan.splits + k, i, k, configs[i].first, configs[i].second});
  }
  return trials;
}

TrialFn training_evaluator(std::optional<int> epochs) {
  return [epochs](const TrialSpec& spec, const HeteroGraph& g, const Split& split) {
    return train_trial(spec.config, g, split, TrainOptions{epochs});
  };
}

// ---------------------------------------------------------------------------
// Records

std::string results_header(std::uint64_t plan_hash) {
  json h;
  h["format"] = kResultsFormat;
  h["plan_hash"] = hex64(plan_hash);
  return h.dump();
}

std::string serialize_record(const TrialRecord& rec) {
  json j;
  j["v"] = rec.format_version;
  j["trial"] = rec.trial_id;
  j["config_id"] = rec.config_id;
  j["split"] = rec.split_id;
  j["setup"] = rec.setup;
  j["seed"] = rec.seed;
  j["status"] = rec.status == TrialStatus::Ok ? "ok" : "failed";
  j["metric"] = rec.metric;
  j["score"] = number_or_null(rec.score);
  j["best_epoch"] = rec.best_epoch;
  j["secondary_metric"] = rec.secondary_metric;
  j["secondary"] = number_or_null(rec.secondary);
  json hist = json::array();
  for (double v : rec.history) hist.push_back(number_or_null(v));
  j["history"] = std::move(hist);
  json losses = json::array();
  for (double v : rec.losses) losses.push_back(number_or_null(v));
  j["losses"] = std::move(losses);
  j["error"] = rec.error;
  j["config"] = rec.config;
  return j.dump();
}

TrialRecord parse_record(std::string_view line) {
  try {
    const auto j = json::parse(line);
    TrialRecord rec;
    rec.format_version = j.at("v").get<int>();
    if (rec.format_version != TrialRecord::kFormatVersion)
      throw Error("unsupported record version " + std::to_string(rec.format_version));
    rec.trial_id = j.at("trial").get<std::size_t>();
    rec.config_id = j.at("config_id").get<std::size_t>();
    rec.split_id = j.at("split").get<std::size_t>();
    rec.setup = j.at("setup").get<std::string>();
    rec.seed = j.at("seed").get<std::uint64_t>();
    const auto status = j.at("status").get<std::string>();
    if (status != "ok" && status != "failed") throw Error("bad status '" + status + "'");
    rec.status = status == "ok" ? TrialStatus::Ok : TrialStatus::Failed;
    rec.metric = j.at("metric").get<std::string>();
    rec.score = number_from(j.at("score"));
    rec.best_epoch = j.at("best_epoch").get<int>();
    rec.secondary_metric = j.at("secondary_metric").get<std::string>();
    rec.secondary = number_from(j.at("secondary"));
    for (const auto& v : j.at("history")) rec.history.push_back(number_from(v));
    for (const auto& v : j.at("losses")) rec.losses.push_back(number_from(v));
    rec.error = j.at("error").get<std::string>();
    rec.config = j.at("config").get<ConfigMap>();
    if (rec.status == TrialStatus::Ok && !std::isfinite(rec.score)) throw Error("ok record without a finite score");
    return rec;
  } catch (const json::exception& e) {
    throw Error(std::string("malformed record: ") + e.what());
  }
}

ResultsFile read_results(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open results file " + path.string());
  ResultsFile out;
  std::string line;
  if (!std::getline(in, line)) throw Error(path.string() + ": empty results file");
  try {
    const auto h = json::parse(line);
    if (h.at("format").get<std::string>() != kResultsFormat) throw Error("unknown format");
    out.plan_hash = std::stoull(h.at("plan_hash").get<std::string>(), nullptr, 16);
  } catch (const std::exception&) {
    throw Error(path.string() + ":1: not a results file header");
  }
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    try {
      out.records.push_back(parse_record(line));
    } catch (const Error&) {
      ++out.corrupt_lines;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Execution

RunSummary run_plan(const ExperimentPlan& plan, RunOptions options) {
  const auto g = load_plan_graph(plan);
  const auto trials = expand_plan(plan, g);
  const auto splits = make_splits(plan.task, g, plan.splits, derive_seed(plan.seed, kSplitStream));
  const auto hash = plan_hash(plan);
  const TrialFn evaluator = options.evaluator ? options.evaluator : training_evaluator(plan.epochs);

  RunSummary summary;
  summary.total = trials.size();
  summary.output = plan.output;
  if (plan.output.has_parent_path()) fs::create_directories(plan.output.parent_path());

  std::vector<TrialRecord> kept;
  if (options.resume && fs::exists(plan.output)) {
    auto existing = read_results(plan.output);
    if (existing.plan_hash != hash)
      throw Error("resume: " + plan.output.string() + " was produced by a different plan (hash " +
                  hex64(existing.plan_hash) + ", expected " + hex64(hash) + ")");
    for (auto& r : existing.records)
      if (r.trial_id < trials.size()) kept.push_back(std::move(r));
  }
  write_atomically(plan.output, render_results(hash, kept));

  std::set<std::size_t> done;
  for (const auto& r : kept) done.insert(r.trial_id);
  std::vector<const TrialSpec*> pending;
  for (const auto& t : trials)
    if (!done.count(t.trial_id)) pending.push_back(&t);

  std::ofstream out(plan.output, std::ios::binary | std::ios::app);
  if (!out) throw Error("cannot append to " + plan.output.string());
  std::ofstream timing(plan.output.string() + ".timing", std::ios::binary | std::ios::app);
  std::mutex write_mutex;
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> failed{0};
  std::exception_ptr io_error;

  auto worker = [&] {
    for (;;) {
      const auto i = next.fetch_add(1);
      if (i >= pending.size()) return;
      const auto rec = execute(*pending[i], g, splits, evaluator);
      if (rec.status == TrialStatus::Failed) ++failed;
      std::lock_guard lock(write_mutex);
      out << serialize_record(rec) << '\n';
      out.flush();
      timing << rec.trial_id << ' ' << format_decimal(rec.wall_seconds) << '\n';
      if (!out && !io_error) io_error = std::make_exception_ptr(Error("write failed: " + plan.output.string()));
    }
  };

  const auto n_threads = std::min(thread_count(plan, options), std::max<std::size_t>(pending.size(), 1));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  out.close();
  timing.close();
  if (io_error) std::rethrow_exception(io_error);

  auto all = read_results(plan.output);
  write_atomically(plan.output, render_results(hash, std::move(all.records)));
  summary.executed = pending.size();
  summary.failed = failed.load();
  return summary;
}

TrialRecord run_single_trial(const ExperimentPlan& plan, std::size_t trial_id, const TrialFn& evaluator) {
  const auto g = load_plan_graph(plan);
  const auto trials = expand_plan(plan, g);
  if (trial_id >= trials.size()) throw Error("trial id " + std::to_string(trial_id) + " out of range");
  const auto splits = make_splits(plan.task, g, plan.splits, derive_seed(plan.seed, kSplitStream));
  return execute(trials[trial_id], g, splits, evaluator ? evaluator : training_evaluator(plan.epochs));
}

}  // namespace hgnn
