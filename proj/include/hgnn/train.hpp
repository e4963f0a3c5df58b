#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hgnn/designspace.hpp"
#include "hgnn/hgraph.hpp"
#include "hgnn/task.hpp"
#include "hgnn/tensor.hpp"

namespace hgnn {

/// One 80/20 train/validation partition. Node classification fills the node
/// index sets (ids of the target type); link prediction the edge sets.
struct Split {
  std::size_t id = 0;
  std::uint64_t seed = 0;
  Index train_nodes;
  Index valid_nodes;
  std::vector<Edge> train_edges;
  std::vector<Edge> valid_edges;
};

/// Deterministic in seed. Split k shuffles with derive_seed(seed, k). Node
/// classification throws when a class has fewer than 5 labeled nodes.
std::vector<Split> make_splits(const Task& task, const HeteroGraph& g, std::size_t n_splits, std::uint64_t seed);

/// Graph a split trains on: for link prediction the validation positives
/// (and their mirrors in the reverse relation) are removed; otherwise g.
HeteroGraph training_graph(const Task& task, const HeteroGraph& g, const Split& split);

/// k corrupted pairs per positive: same source, destination drawn uniformly
/// among those not joined to it in `relation` of g nor listed in positives.
/// Sources whose row is full get a uniformly drawn free pair instead.
/// Throws Error when every pair of the relation is positive.
std::vector<Edge> negative_sample(const HeteroGraph& g, std::string_view relation, const std::vector<Edge>& positives,
                                  std::size_t k, std::uint64_t seed);

/// Adam (beta 0.9/0.999, eps 1e-8) or plain SGD over a fixed parameter list.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double lr, std::vector<Tensor> params);
  /// Applies one update from the parameters' accumulated gradients.
  void step();
  std::size_t steps() const { return t_; }

 private:
  OptimizerKind kind_;
  double lr_;
  std::vector<Tensor> params_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  std::size_t t_ = 0;
};

enum class TrialStatus { Ok, Failed };

struct TrialRecord {
  static constexpr int kFormatVersion = 1;

  std::size_t trial_id = 0;
  std::size_t config_id = 0;
  std::size_t split_id = 0;
  std::string setup;  // ranking setup label, empty for plain sampling
  ConfigMap config;
  std::uint64_t seed = 0;
  TrialStatus status = TrialStatus::Ok;
  std::string metric;  // macro_f1 (node classification) or roc_auc (link prediction)
  double score = 0.0;  // best validation score; NaN when failed
  int best_epoch = 0;
  std::vector<double> history;  // validation score after each epoch, index 0 = initialization
  std::vector<double> losses;   // training loss per epoch, starting at epoch 1
  double secondary = 0.0;       // micro_f1 or mrr at the best epoch
  std::string secondary_metric;
  std::string error;
  double wall_seconds = 0.0;
  int format_version = kFormatVersion;

  bool operator==(const TrialRecord&) const = default;
};

struct TrainOptions {
  /// Replaces cfg.epochs (reduced-budget runs).
  std::optional<int> epochs;
};

/// Full-graph training for the configured number of epochs; the record keeps
/// the best validation epoch. Divergence (non-finite loss or scores) marks the
/// trial failed instead of throwing. Bitwise reproducible given cfg.seed and
/// the split.
TrialRecord train_trial(const DesignConfig& cfg, const HeteroGraph& g, const Split& split, TrainOptions options = {});

}  // namespace hgnn
