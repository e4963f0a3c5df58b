#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "hgnn/designspace.hpp"
#include "hgnn/hgraph.hpp"
#include "hgnn/layers.hpp"
#include "hgnn/tensor.hpp"
#include "hgnn/transform.hpp"

namespace hgnn {

struct ModelOutput {
  /// Post-processed representations, defined for the output types only.
  std::vector<Tensor> h;
  /// Node classification: count(target) x num_classes.
  Tensor logits;
};

/// A network assembled from a DesignConfig:
///   hetero linear -> (pre_layers - 1) per-type linear+activation blocks
///   -> mp_layers x (aggregate -> post-ops -> connect) -> shared post MLP
///   -> head.
/// The model is bound to a graph whose schema it was built for; bind() swaps
/// in another graph of the same schema (e.g. with held-out edges removed).
class Model {
 public:
  /// Throws Error listing every validation failure of cfg against g.
  Model(const DesignConfig& cfg, const HeteroGraph& g);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  void bind(const HeteroGraph& g);

  /// Dropout masks depend on (cfg.seed, step) only.
  ModelOutput forward(bool training, std::uint64_t step = 0);

  /// Raw link scores h_src . h_dst (pairs x 1) for edges of the task relation.
  Tensor link_logits(const ModelOutput& out, const std::vector<Edge>& pairs) const;

  const DesignConfig& config() const { return cfg_; }
  ParameterStore& parameters() { return store_; }
  const ParameterStore& parameters() const { return store_; }
  std::size_t num_parameters() const { return store_.num_scalars(); }
  /// Width entering the post MLP.
  std::size_t post_input_width() const { return post_input_width_; }
  std::size_t num_classes() const { return num_classes_; }
  /// Node types whose representations feed the head.
  const std::vector<std::size_t>& output_types() const { return output_types_; }
  /// Parameters of message-passing layers only.
  std::size_t num_mp_parameters() const;

 private:
  struct MpLayer {
    std::unique_ptr<MicroConv> direct;
    std::vector<std::unique_ptr<MicroConv>> convs;
    std::unique_ptr<MacroAgg> macro;
    std::vector<std::unique_ptr<IntraLayerPost>> post;  // per node type
  };

  DesignConfig cfg_;
  std::vector<NodeType> types_;
  std::vector<Relation> relations_;
  ParameterStore store_;
  std::size_t num_classes_ = 0;
  std::size_t target_ = 0;  // node type (NC) or relation (LP)
  std::vector<std::size_t> output_types_;
  std::size_t post_input_width_ = 0;

  std::vector<Tensor> features_;
  HomoGraph homo_;
  MessageGraph homo_graph_;
  std::vector<PreparedSubgraph> prepared_;

  std::unique_ptr<HeteroLinear> hetero_linear_;
  std::vector<std::vector<std::unique_ptr<Linear>>> pre_blocks_;
  std::vector<std::unique_ptr<ActivationLayer>> pre_acts_;
  std::vector<MpLayer> mp_;
  std::vector<std::unique_ptr<Linear>> post_;
  std::vector<std::unique_ptr<ActivationLayer>> post_acts_;
  std::unique_ptr<Linear> head_;
  std::size_t mp_param_begin_ = 0;
  std::size_t mp_param_end_ = 0;
};

/// sigmoid(h_src[i] . h_dst[i]) for every pair. Throws on out-of-range ids.
std::vector<double> score_links(const Matrix& h_src, const Matrix& h_dst, const std::vector<std::uint32_t>& src_ids,
                                const std::vector<std::uint32_t>& dst_ids);

}  // namespace hgnn
