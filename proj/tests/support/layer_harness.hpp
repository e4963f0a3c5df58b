#pragma once

// Builds one heterogeneous message-passing layer (aggregation followed by
// post-ops) on a random graph and exposes a scalar loss for gradient checks.

#include <memory>
#include <string>
#include <vector>

#include "hgnn/layers.hpp"
#include "oracles.hpp"

namespace harness {

using namespace hgnn;

struct LayerCase {
  ConvKind conv = ConvKind::GCN;
  MacroKind macro = MacroKind::Sum;
  AttentionForm form = AttentionForm::GAT;
  PostOpsConfig post;
  /// Direct aggregation over the homogenized graph instead of dual.
  bool direct = false;
};

inline std::string describe(const LayerCase& c) {
  std::string s = std::string(to_string(c.conv)) + "/" + std::string(c.direct ? "direct" : to_string(c.macro)) + "/" +
                  std::string(to_string(c.form));
  s += c.post.batch_norm ? "/bn" : "";
  s += c.post.activation ? "/" + std::string(to_string(*c.post.activation)) : "";
  s += c.post.l2_norm ? "/l2" : "";
  return s;
}

class Layer {
 public:
  Layer(const LayerCase& c, std::uint64_t seed, std::size_t dim = 4) : case_(c) {
    Rng rng(seed);
    graph_ = oracle::random_graph(rng, 14, 3, 4);
    Initializer init(derive_seed(seed, 1));
    for (std::size_t t = 0; t < graph_.num_types(); ++t)
      h_.push_back(store_.add("h" + std::to_string(t), oracle::random_matrix(rng, graph_.node_type(t).count, dim)));
    if (c.direct) {
      homo_ = homogenize(graph_);
      homo_graph_ = MessageGraph::from_homograph(homo_);
      convs_.push_back(std::make_unique<MicroConv>(store_, init, "conv", c.conv, dim, dim, c.form, graph_.num_relations()));
    } else {
      for (std::size_t r = 0; r < graph_.num_relations(); ++r) {
        const auto sub = extract_relation_subgraphs(graph_, {graph_.relation(r).name})[0];
        prepared_.push_back(prepare_subgraph(graph_, sub, c.conv == ConvKind::GAT));
        convs_.push_back(std::make_unique<MicroConv>(store_, init, "conv" + std::to_string(r), c.conv, dim, dim, c.form));
      }
    }
    macro_ = std::make_unique<MacroAgg>(store_, init, "macro", c.macro, dim);
    for (std::size_t t = 0; t < graph_.num_types(); ++t) {
      post_.push_back(std::make_unique<IntraLayerPost>(store_, "post" + std::to_string(t), dim, c.post));
      auto& stats = post_.back()->stats();
      for (auto& v : stats.running_mean.data()) v = 0.3 * standard_normal(rng);
      for (auto& v : stats.running_var.data()) v = 0.5 + uniform01(rng);
    }
    for (std::size_t t = 0; t < graph_.num_types(); ++t)
      weights_.push_back(oracle::random_matrix(rng, graph_.node_type(t).count, dim));
    // Zero biases put rows with an all-dead GIN hidden layer exactly on the
    // kink of the following activation; check at a generic point instead.
    for (const auto& p : store_.all())
      if (p.name.ends_with(".bias")) {
        auto bias = p.tensor;
        for (auto& v : bias.mutable_value().data()) v = 0.5 * standard_normal(rng);
      }
  }

  const HeteroGraph& graph() const { return graph_; }
  ParameterStore& store() { return store_; }

  AggregateResult aggregate() const {
    if (case_.direct) return direct_aggregate(homo_, homo_graph_, h_, *convs_[0]);
    std::vector<const MicroConv*> convs;
    for (const auto& c : convs_) convs.push_back(c.get());
    return dual_aggregate(prepared_, convs, *macro_, h_);
  }

  /// Aggregation, then post-ops with frozen BN statistics (eval mode), then a
  /// fixed random weighting of every output entry.
  Tensor loss() {
    auto r = aggregate();
    Tensor total;
    for (std::size_t t = 0; t < r.h.size(); ++t) {
      auto x = r.updated[t] ? post_[t]->forward(r.h[t], false, 0) : r.h[t];
      auto term = sum(mul(x, Tensor::constant(weights_[t])));
      total = total.defined() ? add(total, term) : term;
    }
    return total;
  }

  double grad_error() {
    GradCheckOptions opts;
    opts.eps = 1e-6;
    opts.max_coords = 24;
    return grad_check([this] { return loss(); }, store_.tensors(), opts);
  }

 private:
  LayerCase case_;
  HeteroGraph graph_;
  ParameterStore store_;
  std::vector<Tensor> h_;
  HomoGraph homo_;
  MessageGraph homo_graph_;
  std::vector<PreparedSubgraph> prepared_;
  std::vector<std::unique_ptr<MicroConv>> convs_;
  std::unique_ptr<MacroAgg> macro_;
  std::vector<std::unique_ptr<IntraLayerPost>> post_;
  std::vector<Matrix> weights_;
};

/// Every post-op combination the gradient suite covers: BN x activation x L2.
inline std::vector<PostOpsConfig> post_op_grid() {
  std::vector<PostOpsConfig> out;
  for (bool bn : {false, true})
    for (int a = -1; a < 5; ++a)
      for (bool l2 : {false, true}) {
        PostOpsConfig p;
        p.batch_norm = bn;
        p.dropout = 0.3;  // inactive in eval mode
        if (a >= 0) p.activation = static_cast<Activation>(a);
        p.l2_norm = l2;
        out.push_back(p);
      }
  return out;
}

}  // namespace harness
