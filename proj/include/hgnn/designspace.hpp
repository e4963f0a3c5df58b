#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hgnn/hgraph.hpp"
#include "hgnn/layers.hpp"
#include "hgnn/task.hpp"
#include "hgnn/transform.hpp"

namespace hgnn {

enum class ModelFamily { Homogenization, Relation, Metapath };
enum class OptimizerKind { Adam, SGD };

std::string_view to_string(ModelFamily family);
std::string_view to_string(OptimizerKind kind);
std::optional<ModelFamily> parse_model_family(std::string_view name);
std::optional<OptimizerKind> parse_optimizer(std::string_view name);

/// One point of the design space plus everything a trial needs besides the
/// graph: meta-paths, task and seed.
struct DesignConfig {
  ModelFamily family = ModelFamily::Relation;
  ConvKind micro = ConvKind::Sage;
  std::optional<MacroKind> macro = MacroKind::Sum;
  AttentionForm attention_form = AttentionForm::GAT;

  bool batch_norm = false;
  double dropout = 0.0;
  Activation activation = Activation::Relu;
  bool l2_norm = false;
  Connectivity connectivity = Connectivity::Stack;
  int pre_layers = 1;
  int mp_layers = 2;
  int post_layers = 1;
  OptimizerKind optimizer = OptimizerKind::Adam;
  double lr = 0.01;
  int epochs = 100;
  int hidden_dim = 64;

  /// Kept sorted by name.
  std::vector<MetaPath> metapaths;
  Task task;
  std::uint64_t seed = 0;

  bool operator==(const DesignConfig&) const = default;
};

using ConfigMap = std::map<std::string, std::string>;

/// Flat key=value form. Design dimensions use their dimension names and the
/// canonical choice strings; meta-paths appear as metapath.<name>=r1,r2.
ConfigMap to_kv(const DesignConfig& cfg);
/// Throws Error listing every unparsable field. Domain membership is left to
/// validate().
DesignConfig from_kv(const ConfigMap& kv);

/// Design choice value of `dim` in canonical string form, empty if the
/// dimension does not apply.
std::string dimension_value(const DesignConfig& cfg, std::string_view dim);

struct Dimension {
  std::string name;
  std::vector<std::string> choices;
  /// Applies only when dimension `depends_on` takes one of `enabled_by`.
  std::string depends_on;
  std::vector<std::string> enabled_by;

  bool conditional() const { return !depends_on.empty(); }
};

class DesignSpace {
 public:
  DesignSpace(std::string name, std::vector<Dimension> dimensions);

  const std::string& name() const { return name_; }
  const std::vector<Dimension>& dimensions() const { return dims_; }
  const Dimension* find(std::string_view name) const;
  const Dimension& at(std::string_view name) const;

  /// Whether `dim` applies given the values already assigned in `partial`.
  bool applies(const Dimension& dim, const ConfigMap& partial) const;

  /// Exact number of distinct valid assignments.
  std::uint64_t cardinality() const;
  /// Every valid assignment, in lexicographic dimension-order. Throws when
  /// the space has more than `limit` points.
  std::vector<ConfigMap> enumerate(std::uint64_t limit = 100000) const;

 private:
  std::string name_;
  std::vector<Dimension> dims_;
};

DesignSpace full_space();
DesignSpace condensed_space();
/// "full" or "condensed".
DesignSpace space_by_name(std::string_view name);

/// All violations of cfg: unknown or out-of-domain choices, dimensions set
/// where they do not apply, missing required ones, and, when `schema` is
/// given, meta-path chaining and task targets.
std::vector<std::string> validate(const ConfigMap& kv, const DesignSpace& space, const HeteroGraph* schema = nullptr);
std::vector<std::string> validate(const DesignConfig& cfg, const DesignSpace& space,
                                  const HeteroGraph* schema = nullptr);

struct Stratum {
  std::string dataset;
  ModelFamily family = ModelFamily::Relation;
  ConvKind micro = ConvKind::GCN;
  std::size_t hits = 0;
};

/// Every (family, micro) cell of `space` with the given hit count.
std::vector<Stratum> family_micro_strata(const DesignSpace& space, std::size_t hits, const std::string& dataset = "");

/// n configs, deterministic in seed. Stratum cells are filled first (each
/// draw uniform among the valid configs of its cell); the remainder is
/// uniform over all valid configs; the result is shuffled. Non-dimension
/// fields (task, meta-paths, attention form, seed) come from `base`.
std::vector<DesignConfig> sample_controlled(const DesignSpace& space, std::size_t n,
                                            const std::vector<Stratum>& strata, std::uint64_t seed,
                                            const DesignConfig& base = {});

/// Returns cfg with `dim` set to `choice`. Dimensions that become applicable
/// take their first choice in `space`; those that stop applying are cleared.
DesignConfig with_dimension(const DesignSpace& space, const DesignConfig& cfg, std::string_view dim,
                            std::string_view choice);

/// One ranking setup: a config per choice of `dim`, in choice order,
/// otherwise equal to base (base's own value included).
std::vector<DesignConfig> perturb_dimension(const DesignSpace& space, const DesignConfig& base, std::string_view dim);

}  // namespace hgnn
