#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hgnn/common.hpp"
#include "hgnn/hgraph.hpp"
#include "hgnn/tensor.hpp"
#include "hgnn/transform.hpp"

namespace hgnn {

enum class ConvKind { GCN, GAT, Sage, GIN };
enum class MacroKind { Mean, Max, Sum, Attention };
enum class AttentionForm { GAT, SimpleHGN };
enum class Activation { Relu, LeakyRelu, Elu, Tanh, PRelu };
enum class Connectivity { Stack, SkipSum, SkipCat };

// Canonical names, as used in configs and reports.
std::string_view to_string(ConvKind kind);
std::string_view to_string(MacroKind kind);
std::string_view to_string(AttentionForm form);
std::string_view to_string(Activation act);
std::string_view to_string(Connectivity mode);
std::optional<ConvKind> parse_conv_kind(std::string_view name);
std::optional<MacroKind> parse_macro_kind(std::string_view name);
std::optional<AttentionForm> parse_attention_form(std::string_view name);
std::optional<Activation> parse_activation(std::string_view name);
std::optional<Connectivity> parse_connectivity(std::string_view name);

/// Seeded weight initialization. Glorot-uniform for weights, zeros for
/// biases, N(0, 1/d) rows for embeddings.
class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : rng_(seed) {}
  Matrix glorot(std::size_t fan_in, std::size_t fan_out);
  Matrix normal(std::size_t rows, std::size_t cols, double stddev);

 private:
  Rng rng_;
};

/// Edge set a convolution runs over: messages flow from `src` rows of the
/// source features into `dst` rows of the output. Also carries the constant
/// sparse operators the linear convolutions need.
class MessageGraph {
 public:
  MessageGraph() = default;
  MessageGraph(std::size_t num_dst, std::size_t num_src, bool square, Index dst, Index src,
               std::vector<double> weight, Index edge_type, std::size_t num_edge_types, bool gcn_self_loops = true);

  /// Counts become edge weights unless `binarize` is set.
  static MessageGraph from_subgraph(const Subgraph& sub, bool binarize = false, bool gcn_self_loops = true);
  static MessageGraph from_homograph(const HomoGraph& homo, bool binarize = false, bool gcn_self_loops = true);

  std::size_t num_dst() const { return num_dst_; }
  std::size_t num_src() const { return num_src_; }
  std::size_t num_edges() const { return dst_.size(); }
  bool square() const { return square_; }
  const Index& dst() const { return dst_; }
  const Index& src() const { return src_; }
  const Index& edge_type() const { return edge_type_; }
  std::size_t num_edge_types() const { return num_edge_types_; }

  /// Weighted adjacency A (dst x src).
  const std::shared_ptr<const SparseOperand>& sum_operator() const { return sum_op_; }
  /// D^-1 A with D the weighted in-degree; zero rows stay zero.
  const std::shared_ptr<const SparseOperand>& mean_operator() const { return mean_op_; }
  /// Square graphs: D^-1/2 (A + I) D^-1/2 (self-loops optional). Otherwise
  /// the mean operator.
  const std::shared_ptr<const SparseOperand>& gcn_operator() const { return gcn_op_; }

 private:
  std::size_t num_dst_ = 0;
  std::size_t num_src_ = 0;
  bool square_ = false;
  Index dst_;
  Index src_;
  std::vector<double> weight_;
  Index edge_type_;
  std::size_t num_edge_types_ = 1;
  std::shared_ptr<const SparseOperand> sum_op_;
  std::shared_ptr<const SparseOperand> mean_op_;
  std::shared_ptr<const SparseOperand> gcn_op_;
};

class Linear {
 public:
  Linear(ParameterStore& store, Initializer& init, const std::string& name, std::size_t in_dim, std::size_t out_dim,
         bool bias = true);
  Tensor forward(const Tensor& x) const;
  std::size_t in_dim() const { return in_dim_; }
  std::size_t out_dim() const { return out_dim_; }
  const Tensor& weight() const { return weight_; }
  /// Undefined when built without bias.
  const Tensor& bias() const { return bias_; }

 private:
  std::size_t in_dim_;
  std::size_t out_dim_;
  Tensor weight_;
  Tensor bias_;
};

/// Activation function; PReLU owns a learned slope (init 0.25).
class ActivationLayer {
 public:
  ActivationLayer(ParameterStore& store, const std::string& name, Activation kind);
  Tensor forward(const Tensor& x) const;
  Activation kind() const { return kind_; }

 private:
  Activation kind_;
  Tensor slope_;
};

Tensor apply_activation(Activation kind, const Tensor& x, const Tensor& prelu_slope = {});

/// Type-specific projection into the shared hidden space: h' = h W_t + b_t
/// for featured types, a trainable count x out_dim table for featureless ones.
class HeteroLinear {
 public:
  HeteroLinear(ParameterStore& store, Initializer& init, const std::string& name, std::span<const NodeType> types,
               std::size_t out_dim, bool bias = true);
  /// One input per type (ignored, may be undefined, for featureless types).
  std::vector<Tensor> forward(const std::vector<Tensor>& features_by_type) const;
  std::size_t out_dim() const { return out_dim_; }
  const Tensor& weight(std::size_t type) const { return weights_.at(type); }
  const Tensor& bias(std::size_t type) const { return biases_.at(type); }
  const Tensor& embedding(std::size_t type) const { return embeddings_.at(type); }

 private:
  std::vector<NodeType> types_;
  std::size_t out_dim_;
  std::vector<Tensor> weights_;
  std::vector<Tensor> biases_;
  std::vector<Tensor> embeddings_;
};

/// One graph convolution, reducing source messages per destination node.
///
///  GCN:  gcn_operator * h_src * W
///  GAT:  alpha = softmax over each destination's incoming edges of
///        LeakyReLU(a_dst . W h_i + a_src . W h_j [+ a_rel . W_r r_type]),
///        output sum_j alpha_ij W h_j. The bracketed term is the SimpleHGN
///        form; with W_r = 0 it vanishes exactly.
///  Sage: [h_dst || mean_operator * h_src] W + b
///  GIN:  MLP((1 + eps) h_dst + sum_operator * h_src), two layers, ReLU inside
///
/// Nodes without incoming edges get a zero aggregate (GCN without
/// self-loops, GAT); Sage and GIN still see their own row.
class MicroConv {
 public:
  MicroConv(ParameterStore& store, Initializer& init, const std::string& name, ConvKind kind, std::size_t in_dim,
            std::size_t out_dim, AttentionForm form = AttentionForm::GAT, std::size_t num_edge_types = 1);

  /// `attention`, when given, receives the per-edge GAT coefficients (E x 1).
  Tensor forward(const MessageGraph& graph, const Tensor& h_src, const Tensor& h_dst, Tensor* attention = nullptr) const;

  ConvKind kind() const { return kind_; }
  AttentionForm form() const { return form_; }
  std::size_t in_dim() const { return in_dim_; }
  std::size_t out_dim() const { return out_dim_; }
  /// SimpleHGN relation projection W_r (undefined otherwise).
  Tensor& relation_projection() { return rel_proj_; }
  /// Every trainable tensor of the convolution.
  std::vector<Tensor> parameters() const;

 private:
  ConvKind kind_;
  AttentionForm form_;
  std::size_t in_dim_;
  std::size_t out_dim_;
  Tensor weight_;
  Tensor bias_;
  Tensor att_dst_;
  Tensor att_src_;
  Tensor rel_emb_;
  Tensor rel_proj_;
  Tensor att_rel_;
  Tensor gin_eps_;
  std::optional<Linear> gin_hidden_;
  std::optional<Linear> gin_out_;
};

Tensor micro_conv(const MicroConv& conv, const Subgraph& sub, const Tensor& h_src, const Tensor& h_dst);

/// Cross-subgraph reducer for one destination type. Attention computes one
/// weight per input, mean over nodes of q . tanh(z W + b), softmaxed across
/// inputs.
class MacroAgg {
 public:
  MacroAgg(ParameterStore& store, Initializer& init, const std::string& name, MacroKind kind, std::size_t dim);
  /// `weights`, when given, receives the per-input mixing weights.
  Tensor forward(const std::vector<Tensor>& inputs, std::vector<double>* weights = nullptr) const;
  MacroKind kind() const { return kind_; }

 private:
  MacroKind kind_;
  Tensor proj_;
  Tensor proj_bias_;
  Tensor context_;
};

Tensor macro_aggregate(const MacroAgg& agg, const std::vector<Tensor>& per_subgraph_outputs);

struct PreparedSubgraph {
  std::string name;
  SubgraphOrigin origin = SubgraphOrigin::Relation;
  std::size_t src_type = 0;
  std::size_t dst_type = 0;
  MessageGraph graph;
};

PreparedSubgraph prepare_subgraph(const HeteroGraph& g, const Subgraph& sub, bool binarize = false);

struct AggregateResult {
  std::vector<Tensor> h;        // per node type
  std::vector<bool> updated;    // false: type received no subgraph and passed through
  std::vector<Tensor> attention;  // per subgraph (dual) or single entry (direct); GAT only
  std::vector<std::vector<double>> macro_weights;  // per node type
};

/// Micro convolution per subgraph, then macro reduction per destination type.
/// `convs[i]` runs on `subgraphs[i]`; GAT softmax is scoped to that subgraph.
AggregateResult dual_aggregate(std::span<const PreparedSubgraph> subgraphs, std::span<const MicroConv* const> convs,
                               const MacroAgg& macro, const std::vector<Tensor>& h_by_type);

/// One convolution over the homogenized graph; GAT softmax spans every
/// incoming edge regardless of type.
AggregateResult direct_aggregate(const HomoGraph& homo, const MessageGraph& graph, const std::vector<Tensor>& h_by_type,
                                 const MicroConv& conv);

struct PostOpsConfig {
  bool batch_norm = false;
  double dropout = 0.0;
  std::optional<Activation> activation;
  bool l2_norm = false;
};

/// BN -> Dropout -> Activation -> L2-Norm, each optional.
class IntraLayerPost {
 public:
  IntraLayerPost(ParameterStore& store, const std::string& name, std::size_t dim, PostOpsConfig config);
  Tensor forward(const Tensor& h, bool training, std::uint64_t dropout_seed);
  BatchNormStats& stats() { return stats_; }

 private:
  PostOpsConfig config_;
  Tensor gamma_;
  Tensor beta_;
  BatchNormStats stats_;
  Tensor prelu_slope_;
};

/// STACK -> h_new, SKIP-SUM -> h_prev + h_new, SKIP-CAT -> [h_prev || h_new].
Tensor connect(Connectivity mode, const Tensor& h_prev, const Tensor& h_new);

}  // namespace hgnn
