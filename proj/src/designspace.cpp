#include "hgnn/designspace.hpp"

#include <algorithm>
#include <charconv>
#include <functional>
#include <set>

#include "hgnn/common.hpp"

namespace hgnn {

namespace {

const char* const kBool[] = {"False", "True"};

std::optional<double> parse_double(std::string_view text) {
  double v = 0.0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || end != text.data() + text.size() || text.empty()) return std::nullopt;
  return v;
}

template <typename T>
std::optional<T> parse_int(std::string_view text) {
  T v = 0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || end != text.data() + text.size() || text.empty()) return std::nullopt;
  return v;
}

std::optional<bool> parse_bool(std::string_view text) {
  if (text == "True") return true;
  if (text == "False") return false;
  return std::nullopt;
}

/// Numbers compare by value ("0.30" == "0.3"); everything else verbatim.
std::string canonical(std::string_view value) {
  if (auto d = parse_double(value)) return format_decimal(*d);
  return std::string(value);
}

std::string join(const std::vector<std::string>& items, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

const std::set<std::string, std::less<>> kExtraKeys = {
    "attention_form", "task", "target", "reverse_relation", "num_classes", "negatives", "eval_negatives", "seed"};

constexpr std::string_view kMetapathPrefix = "metapath.";

std::vector<std::string> int_choices(std::initializer_list<int> values) {
  std::vector<std::string> out;
  for (int v : values) out.push_back(std::to_string(v));
  return out;
}

std::vector<Dimension> unique_dimensions() {
  return {
      {"model_family", {"Homogenization", "Relation", "Metapath"}, "", {}},
      {"micro_conv", {"GCNConv", "GATConv", "SageConv", "GINConv"}, "", {}},
      {"macro_agg", {"Mean", "Max", "Sum", "Attention"}, "model_family", {"Relation", "Metapath"}},
  };
}

/// Replaces the dimension keys of kv so that applicability holds again.
void repair(const DesignSpace& space, ConfigMap& kv) {
  for (const auto& d : space.dimensions()) {
    const bool present = kv.count(d.name) > 0;
    const bool applies = space.applies(d, kv);
    if (applies && !present) kv[d.name] = d.choices.front();
    if (!applies && present) kv.erase(d.name);
  }
}

}  // namespace

std::string_view to_string(ModelFamily family) {
  switch (family) {
    case ModelFamily::Homogenization: return "Homogenization";
    case ModelFamily::Relation: return "Relation";
    case ModelFamily::Metapath: return "Metapath";
  }
  throw Error("unknown model family");
}

std::string_view to_string(OptimizerKind kind) { return kind == OptimizerKind::Adam ? "Adam" : "SGD"; }

std::optional<ModelFamily> parse_model_family(std::string_view name) {
  if (name == "Homogenization") return ModelFamily::Homogenization;
  if (name == "Relation") return ModelFamily::Relation;
  if (name == "Metapath") return ModelFamily::Metapath;
  return std::nullopt;
}

std::optional<OptimizerKind> parse_optimizer(std::string_view name) {
  if (name == "Adam") return OptimizerKind::Adam;
  if (name == "SGD") return OptimizerKind::SGD;
  return std::nullopt;
}

std::string_view to_string(TaskKind kind) {
  return kind == TaskKind::NodeClassification ? "node_classification" : "link_prediction";
}

std::optional<TaskKind> parse_task_kind(std::string_view name) {
  if (name == "node_classification") return TaskKind::NodeClassification;
  if (name == "link_prediction") return TaskKind::LinkPrediction;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Flat form

ConfigMap to_kv(const DesignConfig& cfg) {
  ConfigMap kv;
  kv["model_family"] = to_string(cfg.family);
  kv["micro_conv"] = to_string(cfg.micro);
  if (cfg.macro) kv["macro_agg"] = to_string(*cfg.macro);
  kv["attention_form"] = to_string(cfg.attention_form);
  kv["batch_norm"] = kBool[cfg.batch_norm];
  kv["dropout"] = format_decimal(cfg.dropout);
  kv["activation"] = to_string(cfg.activation);
  kv["l2_norm"] = kBool[cfg.l2_norm];
  kv["connectivity"] = to_string(cfg.connectivity);
  kv["pre_layers"] = std::to_string(cfg.pre_layers);
  kv["mp_layers"] = std::to_string(cfg.mp_layers);
  kv["post_layers"] = std::to_string(cfg.post_layers);
  kv["optimizer"] = to_string(cfg.optimizer);
  kv["lr"] = format_decimal(cfg.lr);
  kv["epochs"] = std::to_string(cfg.epochs);
  kv["hidden_dim"] = std::to_string(cfg.hidden_dim);
  for (const auto& mp : cfg.metapaths) kv[std::string(kMetapathPrefix) + mp.name] = join(mp.relations, ",");
  kv["task"] = to_string(cfg.task.kind);
  kv["target"] = cfg.task.target;
  if (!cfg.task.reverse_relation.empty()) kv["reverse_relation"] = cfg.task.reverse_relation;
  kv["num_classes"] = std::to_string(cfg.task.num_classes);
  kv["negatives"] = std::to_string(cfg.task.negatives);
  kv["eval_negatives"] = std::to_string(cfg.task.eval_negatives);
  kv["seed"] = std::to_string(cfg.seed);
  return kv;
}

DesignConfig from_kv(const ConfigMap& kv) {
  DesignConfig cfg;
  std::vector<std::string> errors;
  auto get = [&](const char* key) -> const std::string* {
    auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second;
  };
  auto bad = [&](const char* key, const std::string& value) {
    errors.push_back(std::string(key) + ": cannot parse '" + value + "'");
  };
  auto enum_field = [&](const char* key, auto parser, auto& out) {
    if (const auto* v = get(key)) {
      if (auto p = parser(*v))
        out = *p;
      else
        bad(key, *v);
    }
  };
  auto int_field = [&](const char* key, auto& out) {
    using T = std::remove_reference_t<decltype(out)>;
    if (const auto* v = get(key)) {
      if (auto p = parse_int<T>(*v))
        out = *p;
      else
        bad(key, *v);
    }
  };
  auto double_field = [&](const char* key, double& out) {
    if (const auto* v = get(key)) {
      if (auto p = parse_double(*v))
        out = *p;
      else
        bad(key, *v);
    }
  };
  auto bool_field = [&](const char* key, bool& out) {
    if (const auto* v = get(key)) {
      if (auto p = parse_bool(*v))
        out = *p;
      else
        bad(key, *v);
    }
  };

  enum_field("model_family", parse_model_family, cfg.family);
  enum_field("micro_conv", parse_conv_kind, cfg.micro);
  cfg.macro.reset();
  if (const auto* v = get("macro_agg")) {
    if (auto p = parse_macro_kind(*v))
      cfg.macro = *p;
    else
      bad("macro_agg", *v);
  }
  enum_field("attention_form", parse_attention_form, cfg.attention_form);
  bool_field("batch_norm", cfg.batch_norm);
  double_field("dropout", cfg.dropout);
  enum_field("activation", parse_activation, cfg.activation);
  bool_field("l2_norm", cfg.l2_norm);
  enum_field("connectivity", parse_connectivity, cfg.connectivity);
  int_field("pre_layers", cfg.pre_layers);
  int_field("mp_layers", cfg.mp_layers);
  int_field("post_layers", cfg.post_layers);
  enum_field("optimizer", parse_optimizer, cfg.optimizer);
  double_field("lr", cfg.lr);
  int_field("epochs", cfg.epochs);
  int_field("hidden_dim", cfg.hidden_dim);
  enum_field("task", parse_task_kind, cfg.task.kind);
  if (const auto* v = get("target")) cfg.task.target = *v;
  if (const auto* v = get("reverse_relation")) cfg.task.reverse_relation = *v;
  int_field("num_classes", cfg.task.num_classes);
  int_field("negatives", cfg.task.negatives);
  int_field("eval_negatives", cfg.task.eval_negatives);
  int_field("seed", cfg.seed);

  for (auto it = kv.lower_bound(std::string(kMetapathPrefix)); it != kv.end(); ++it) {
    if (!it->first.starts_with(kMetapathPrefix)) break;
    MetaPath mp;
    mp.name = it->first.substr(kMetapathPrefix.size());
    for (auto& r : split(it->second, ',')) {
      auto t = trim(r);
      if (!t.empty()) mp.relations.push_back(std::move(t));
    }
    cfg.metapaths.push_back(std::move(mp));
  }

  if (!errors.empty()) throw Error("invalid config: " + join(errors, "; "));
  return cfg;
}

std::string dimension_value(const DesignConfig& cfg, std::string_view dim) {
  const auto kv = to_kv(cfg);
  auto it = kv.find(std::string(dim));
  return it == kv.end() ? std::string() : it->second;
}

DesignConfig with_dimension(const DesignSpace& space, const DesignConfig& cfg, std::string_view dim,
                            std::string_view choice) {
  auto kv = to_kv(cfg);
  kv[std::string(dim)] = std::string(choice);
  repair(space, kv);
  return from_kv(kv);
}

// ---------------------------------------------------------------------------
// Spaces

DesignSpace::DesignSpace(std::string name, std::vector<Dimension> dimensions)
    : name_(std::move(name)), dims_(std::move(dimensions)) {
  std::set<std::string, std::less<>> seen;
  for (const auto& d : dims_) {
    if (d.choices.empty()) throw Error("dimension '" + d.name + "' has no choices");
    if (!seen.insert(d.name).second) throw Error("duplicate dimension '" + d.name + "'");
    if (d.conditional() && !seen.count(d.depends_on))
      throw Error("dimension '" + d.name + "' depends on '" + d.depends_on + "', which must come first");
  }
}

const Dimension* DesignSpace::find(std::string_view name) const {
  for (const auto& d : dims_)
    if (d.name == name) return &d;
  return nullptr;
}

const Dimension& DesignSpace::at(std::string_view name) const {
  if (const auto* d = find(name)) return *d;
  throw Error("unknown design dimension '" + std::string(name) + "'");
}

bool DesignSpace::applies(const Dimension& dim, const ConfigMap& partial) const {
  if (!dim.conditional()) return true;
  auto it = partial.find(dim.depends_on);
  if (it == partial.end()) return false;
  return std::find(dim.enabled_by.begin(), dim.enabled_by.end(), it->second) != dim.enabled_by.end();
}

std::uint64_t DesignSpace::cardinality() const {
  std::set<std::string, std::less<>> linked;
  for (const auto& d : dims_)
    if (d.conditional()) {
      linked.insert(d.name);
      linked.insert(d.depends_on);
    }
  std::uint64_t independent = 1;
  std::vector<const Dimension*> block;
  for (const auto& d : dims_) {
    if (linked.count(d.name))
      block.push_back(&d);
    else
      independent *= d.choices.size();
  }
  ConfigMap partial;
  std::function<std::uint64_t(std::size_t)> count = [&](std::size_t i) -> std::uint64_t {
    if (i == block.size()) return 1;
    const auto& d = *block[i];
    if (!applies(d, partial)) return count(i + 1);
    std::uint64_t total = 0;
    for (const auto& c : d.choices) {
      partial[d.name] = c;
      total += count(i + 1);
    }
    partial.erase(d.name);
    return total;
  };
  return independent * count(0);
}

std::vector<ConfigMap> DesignSpace::enumerate(std::uint64_t limit) const {
  if (cardinality() > limit) throw Error("design space '" + name_ + "' is too large to enumerate");
  std::vector<ConfigMap> out;
  ConfigMap partial;
  std::function<void(std::size_t)> walk = [&](std::size_t i) {
    if (i == dims_.size()) {
      out.push_back(partial);
      return;
    }
    const auto& d = dims_[i];
    if (!applies(d, partial)) {
      walk(i + 1);
      return;
    }
    for (const auto& c : d.choices) {
      partial[d.name] = c;
      walk(i + 1);
    }
    partial.erase(d.name);
  };
  walk(0);
  return out;
}

DesignSpace full_space() {
  std::vector<Dimension> dims = {
      {"batch_norm", {"True", "False"}, "", {}},
      {"dropout", {"0", "0.3", "0.6"}, "", {}},
      {"activation", {"Relu", "LeakyRelu", "Elu", "Tanh", "PRelu"}, "", {}},
      {"l2_norm", {"True", "False"}, "", {}},
      {"connectivity", {"STACK", "SKIP-SUM", "SKIP-CAT"}, "", {}},
      {"pre_layers", int_choices({1, 2, 3}), "", {}},
      {"mp_layers", int_choices({1, 2, 3, 4, 5, 6}), "", {}},
      {"post_layers", int_choices({1, 2, 3}), "", {}},
      {"optimizer", {"Adam", "SGD"}, "", {}},
      {"lr", {"0.1", "0.01", "0.001", "0.0001"}, "", {}},
      {"epochs", int_choices({100, 200, 400}), "", {}},
      {"hidden_dim", int_choices({8, 16, 32, 64, 128}), "", {}},
  };
  for (auto& d : unique_dimensions()) dims.push_back(std::move(d));
  return DesignSpace("full", std::move(dims));
}

DesignSpace condensed_space() {
  std::vector<Dimension> dims = {
      {"batch_norm", {"True", "False"}, "", {}},
      {"dropout", {"0", "0.3"}, "", {}},
      {"activation", {"Elu", "LeakyRelu", "Tanh"}, "", {}},
      {"l2_norm", {"True", "False"}, "", {}},
      {"connectivity", {"SKIP-SUM", "SKIP-CAT"}, "", {}},
      {"pre_layers", int_choices({1}), "", {}},
      {"mp_layers", int_choices({1, 2, 3, 4, 5, 6}), "", {}},
      {"post_layers", int_choices({1, 2}), "", {}},
      {"optimizer", {"Adam"}, "", {}},
      {"lr", {"0.1", "0.01"}, "", {}},
      {"epochs", int_choices({400}), "", {}},
      {"hidden_dim", int_choices({64, 128}), "", {}},
  };
  for (auto& d : unique_dimensions()) dims.push_back(std::move(d));
  return DesignSpace("condensed", std::move(dims));
}

DesignSpace space_by_name(std::string_view name) {
  if (name == "full") return full_space();
  if (name == "condensed") return condensed_space();
  throw Error("unknown design space '" + std::string(name) + "' (expected full or condensed)");
}

// ---------------------------------------------------------------------------
// Validation

std::vector<std::string> validate(const ConfigMap& kv, const DesignSpace& space, const HeteroGraph* schema) {
  std::vector<std::string> errors;
  for (const auto& d : space.dimensions()) {
    auto it = kv.find(d.name);
    const bool applies = space.applies(d, kv);
    if (it == kv.end()) {
      if (applies) errors.push_back(d.name + ": missing");
      continue;
    }
    if (!applies) {
      auto dep = kv.find(d.depends_on);
      errors.push_back(d.name + ": does not apply when " + d.depends_on + "=" +
                       (dep == kv.end() ? std::string("<unset>") : dep->second));
      continue;
    }
    const auto value = canonical(it->second);
    if (std::find(d.choices.begin(), d.choices.end(), value) == d.choices.end())
      errors.push_back(d.name + ": '" + it->second + "' is not one of {" + join(d.choices, ", ") + "}");
  }
  for (const auto& [key, value] : kv) {
    if (space.find(key) || kExtraKeys.count(key) || key.starts_with(kMetapathPrefix)) continue;
    errors.push_back(key + ": unknown field");
  }

  auto lookup = [&](const char* key) -> std::string {
    auto it = kv.find(key);
    return it == kv.end() ? std::string() : it->second;
  };
  if (!parse_attention_form(lookup("attention_form")) && kv.count("attention_form"))
    errors.push_back("attention_form: '" + lookup("attention_form") + "' is not one of {GAT, SimpleHGN}");
  const auto task = parse_task_kind(lookup("task"));
  if (!task) errors.push_back("task: '" + lookup("task") + "' is not one of {node_classification, link_prediction}");
  const auto target = lookup("target");
  if (target.empty()) errors.push_back("target: missing");
  for (const char* key : {"num_classes", "negatives", "eval_negatives", "seed"})
    if (kv.count(key) && !parse_int<std::uint64_t>(lookup(key)))
      errors.push_back(std::string(key) + ": '" + lookup(key) + "' is not a non-negative integer");
  if (kv.count("negatives") && lookup("negatives") == "0") errors.push_back("negatives: must be at least 1");
  if (kv.count("eval_negatives") && lookup("eval_negatives") == "0")
    errors.push_back("eval_negatives: must be at least 1");

  std::vector<MetaPath> metapaths;
  for (auto it = kv.lower_bound(std::string(kMetapathPrefix)); it != kv.end(); ++it) {
    if (!it->first.starts_with(kMetapathPrefix)) break;
    MetaPath mp{it->first.substr(kMetapathPrefix.size()), {}};
    for (auto& r : split(it->second, ',')) {
      auto t = trim(r);
      if (!t.empty()) mp.relations.push_back(std::move(t));
    }
    if (mp.name.empty()) errors.push_back(it->first + ": meta-path needs a name");
    if (mp.relations.empty()) errors.push_back(it->first + ": meta-path has no relations");
    metapaths.push_back(std::move(mp));
  }
  const auto family = parse_model_family(lookup("model_family"));
  if (family == ModelFamily::Metapath && metapaths.empty())
    errors.push_back("metapaths: the Metapath family needs at least one meta-path");

  if (!schema) return errors;

  for (const auto& mp : metapaths) {
    if (mp.relations.empty()) continue;
    try {
      check_metapath(*schema, mp);
    } catch (const Error& e) {
      errors.push_back(std::string("metapath.") + mp.name + ": " + e.what());
    }
  }
  if (!task || target.empty()) return errors;
  if (*task == TaskKind::NodeClassification) {
    const auto t = schema->find_type(target);
    if (!t) {
      errors.push_back("target: unknown node type '" + target + "'");
      return errors;
    }
    if (!schema->has_labels(*t)) errors.push_back("target: node type '" + target + "' has no labels");
    if (family == ModelFamily::Relation) {
      bool incoming = false;
      for (std::size_t r = 0; r < schema->num_relations(); ++r) incoming |= schema->relation_dst(r) == *t;
      if (!incoming) errors.push_back("target: node type '" + target + "' has no incoming relation");
    }
    if (family == ModelFamily::Metapath && !metapaths.empty()) {
      bool reaches = false;
      for (const auto& mp : metapaths) {
        const auto r = mp.relations.empty() ? std::nullopt : schema->find_relation(mp.relations.back());
        reaches |= r && schema->relation_dst(*r) == *t;
      }
      if (!reaches) errors.push_back("metapaths: none ends at target type '" + target + "'");
    }
  } else {
    const auto r = schema->find_relation(target);
    if (!r) errors.push_back("target: unknown relation '" + target + "'");
    const auto rev = lookup("reverse_relation");
    if (!rev.empty()) {
      const auto rr = schema->find_relation(rev);
      if (!rr)
        errors.push_back("reverse_relation: unknown relation '" + rev + "'");
      else if (r && (schema->relation_src(*rr) != schema->relation_dst(*r) ||
                     schema->relation_dst(*rr) != schema->relation_src(*r)))
        errors.push_back("reverse_relation: '" + rev + "' does not mirror '" + target + "'");
    }
  }
  return errors;
}

std::vector<std::string> validate(const DesignConfig& cfg, const DesignSpace& space, const HeteroGraph* schema) {
  return validate(to_kv(cfg), space, schema);
}

// ---------------------------------------------------------------------------
// Sampling

std::vector<Stratum> family_micro_strata(const DesignSpace& space, std::size_t hits, const std::string& dataset) {
  std::vector<Stratum> out;
  for (const auto& f : space.at("model_family").choices)
    for (const auto& m : space.at("micro_conv").choices)
      out.push_back({dataset, *parse_model_family(f), *parse_conv_kind(m), hits});
  return out;
}

std::vector<DesignConfig> sample_controlled(const DesignSpace& space, std::size_t n,
                                            const std::vector<Stratum>& strata, std::uint64_t seed,
                                            const DesignConfig& base) {
  std::size_t required = 0;
  for (const auto& s : strata) required += s.hits;
  if (required > n)
    throw Error("infeasible strata: " + std::to_string(required) + " required hits exceed n = " + std::to_string(n));
  if (n == 0) return {};

  // Dimensions tied by applicability are drawn jointly from their valid
  // combinations; all others independently.
  std::set<std::string, std::less<>> linked;
  for (const auto& d : space.dimensions())
    if (d.conditional()) {
      linked.insert(d.name);
      linked.insert(d.depends_on);
    }
  linked.insert("model_family");
  linked.insert("micro_conv");
  std::vector<Dimension> block_dims;
  for (const auto& d : space.dimensions())
    if (linked.count(d.name)) block_dims.push_back(d);
  const auto blocks = DesignSpace(space.name(), block_dims).enumerate();

  auto template_kv = to_kv(base);
  for (const auto& d : space.dimensions()) template_kv.erase(d.name);

  Rng rng(seed);
  auto draw = [&](const ConfigMap& block) {
    ConfigMap kv = template_kv;
    for (const auto& d : space.dimensions()) {
      if (linked.count(d.name)) continue;
      kv[d.name] = d.choices[uniform_index(rng, d.choices.size())];
    }
    for (const auto& [k, v] : block) kv[k] = v;
    return from_kv(kv);
  };

  std::vector<DesignConfig> out;
  out.reserve(n);
  for (const auto& s : strata) {
    std::vector<const ConfigMap*> cell;
    for (const auto& b : blocks)
      if (b.at("model_family") == to_string(s.family) && b.at("micro_conv") == to_string(s.micro)) cell.push_back(&b);
    if (cell.empty() && s.hits > 0)
      throw Error("stratum (" + std::string(to_string(s.family)) + ", " + std::string(to_string(s.micro)) +
                  ") is not part of design space '" + space.name() + "'");
    for (std::size_t h = 0; h < s.hits; ++h) out.push_back(draw(*cell[uniform_index(rng, cell.size())]));
  }
  while (out.size() < n) out.push_back(draw(blocks[uniform_index(rng, blocks.size())]));
  shuffle(out, rng);
  return out;
}

std::vector<DesignConfig> perturb_dimension(const DesignSpace& space, const DesignConfig& base, std::string_view dim) {
  const auto& d = space.at(dim);
  const auto kv = to_kv(base);
  if (!space.applies(d, kv)) {
    auto dep = kv.find(d.depends_on);
    throw Error("dimension '" + d.name + "' does not apply when " + d.depends_on + "=" +
                (dep == kv.end() ? std::string("<unset>") : dep->second));
  }
  std::vector<DesignConfig> out;
  out.reserve(d.choices.size());
  for (const auto& c : d.choices) out.push_back(with_dimension(space, base, dim, c));
  return out;
}

}  // namespace hgnn
