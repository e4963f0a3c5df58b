#include "hgnn/layers.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

namespace hgnn {

namespace {

template <typename E, std::size_t N>
std::optional<E> lookup(const std::array<std::pair<E, std::string_view>, N>& table, std::string_view name) {
  for (const auto& [value, text] : table)
    if (text == name) return value;
  return std::nullopt;
}

template <typename E, std::size_t N>
std::string_view name_of(const std::array<std::pair<E, std::string_view>, N>& table, E value) {
  for (const auto& [v, text] : table)
    if (v == value) return text;
  throw Error("unnamed enum value");
}

constexpr std::array<std::pair<ConvKind, std::string_view>, 4> kConvNames{
    {{ConvKind::GCN, "GCNConv"}, {ConvKind::GAT, "GATConv"}, {ConvKind::Sage, "SageConv"}, {ConvKind::GIN, "GINConv"}}};
constexpr std::array<std::pair<MacroKind, std::string_view>, 4> kMacroNames{{{MacroKind::Mean, "Mean"},
                                                                              {MacroKind::Max, "Max"},
                                                                              {MacroKind::Sum, "Sum"},
                                                                              {MacroKind::Attention, "Attention"}}};
constexpr std::array<std::pair<AttentionForm, std::string_view>, 2> kFormNames{
    {{AttentionForm::GAT, "GAT"}, {AttentionForm::SimpleHGN, "SimpleHGN"}}};
constexpr std::array<std::pair<Activation, std::string_view>, 5> kActNames{{{Activation::Relu, "Relu"},
                                                                             {Activation::LeakyRelu, "LeakyRelu"},
                                                                             {Activation::Elu, "Elu"},
                                                                             {Activation::Tanh, "Tanh"},
                                                                             {Activation::PRelu, "PRelu"}}};
constexpr std::array<std::pair<Connectivity, std::string_view>, 3> kConnNames{
    {{Connectivity::Stack, "STACK"}, {Connectivity::SkipSum, "SKIP-SUM"}, {Connectivity::SkipCat, "SKIP-CAT"}}};

std::shared_ptr<const SparseOperand> build_operand(std::size_t rows, std::size_t cols, const Index& dst,
                                                   const Index& src, const std::vector<double>& w) {
  auto op = std::make_shared<SparseOperand>();
  op->rows = rows;
  op->cols = cols;
  op->row_ptr.assign(rows + 1, 0);
  for (auto d : dst) ++op->row_ptr[d + 1];
  for (std::size_t r = 0; r < rows; ++r) op->row_ptr[r + 1] += op->row_ptr[r];
  op->col_idx.resize(dst.size());
  op->values.resize(dst.size());
  auto cursor = op->row_ptr;
  for (std::size_t e = 0; e < dst.size(); ++e) {
    const auto at = cursor[dst[e]]++;
    op->col_idx[at] = src[e];
    op->values[at] = w[e];
  }
  return op;
}

}  // namespace

std::string_view to_string(ConvKind kind) { return name_of(kConvNames, kind); }
std::string_view to_string(MacroKind kind) { return name_of(kMacroNames, kind); }
std::string_view to_string(AttentionForm form) { return name_of(kFormNames, form); }
std::string_view to_string(Activation act) { return name_of(kActNames, act); }
std::string_view to_string(Connectivity mode) { return name_of(kConnNames, mode); }
std::optional<ConvKind> parse_conv_kind(std::string_view name) { return lookup(kConvNames, name); }
std::optional<MacroKind> parse_macro_kind(std::string_view name) { return lookup(kMacroNames, name); }
std::optional<AttentionForm> parse_attention_form(std::string_view name) { return lookup(kFormNames, name); }
std::optional<Activation> parse_activation(std::string_view name) { return lookup(kActNames, name); }
std::optional<Connectivity> parse_connectivity(std::string_view name) { return lookup(kConnNames, name); }

Matrix Initializer::glorot(std::size_t fan_in, std::size_t fan_out) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Matrix m(fan_in, fan_out);
  for (auto& v : m.data()) v = (2.0 * uniform01(rng_) - 1.0) * bound;
  return m;
}

Matrix Initializer::normal(std::size_t rows, std::size_t cols, double stddev) {
  Matrix m(rows, cols);
  for (auto& v : m.data()) v = standard_normal(rng_) * stddev;
  return m;
}

// ---------------------------------------------------------------------------
// MessageGraph

MessageGraph::MessageGraph(std::size_t num_dst, std::size_t num_src, bool square, Index dst, Index src,
                           std::vector<double> weight, Index edge_type, std::size_t num_edge_types,
                           bool gcn_self_loops)
    : num_dst_(num_dst),
      num_src_(num_src),
      square_(square),
      dst_(std::move(dst)),
      src_(std::move(src)),
      weight_(std::move(weight)),
      edge_type_(std::move(edge_type)),
      num_edge_types_(std::max<std::size_t>(num_edge_types, 1)) {
  const auto m = dst_.size();
  if (src_.size() != m || weight_.size() != m) throw Error("message graph: edge arrays differ in length");
  if (edge_type_.empty()) edge_type_.assign(m, 0);
  if (edge_type_.size() != m) throw Error("message graph: edge type array has the wrong length");
  if (square_ && num_dst_ != num_src_) throw Error("message graph: square graph needs equal node counts");
  for (std::size_t e = 0; e < m; ++e) {
    if (dst_[e] >= num_dst_ || src_[e] >= num_src_) throw Error("message graph: edge endpoint out of range");
    if (edge_type_[e] >= num_edge_types_) throw Error("message graph: edge type out of range");
  }

  sum_op_ = build_operand(num_dst_, num_src_, dst_, src_, weight_);

  std::vector<double> in_deg(num_dst_, 0.0);
  for (std::size_t e = 0; e < m; ++e) in_deg[dst_[e]] += weight_[e];
  std::vector<double> mean_w(m);
  for (std::size_t e = 0; e < m; ++e) mean_w[e] = weight_[e] / in_deg[dst_[e]];
  mean_op_ = build_operand(num_dst_, num_src_, dst_, src_, mean_w);

  if (!square_) {
    gcn_op_ = mean_op_;
    return;
  }
  Index gd = dst_;
  Index gs = src_;
  std::vector<double> gw = weight_;
  if (gcn_self_loops) {
    for (std::size_t v = 0; v < num_dst_; ++v) {
      gd.push_back(static_cast<std::uint32_t>(v));
      gs.push_back(static_cast<std::uint32_t>(v));
      gw.push_back(1.0);
    }
  }
  std::vector<double> deg(num_dst_, 0.0);
  for (std::size_t e = 0; e < gd.size(); ++e) deg[gd[e]] += gw[e];
  for (std::size_t e = 0; e < gd.size(); ++e) {
    const double a = deg[gd[e]];
    const double b = deg[gs[e]];
    gw[e] = (a > 0.0 && b > 0.0) ? gw[e] / std::sqrt(a * b) : 0.0;
  }
  gcn_op_ = build_operand(num_dst_, num_src_, gd, gs, gw);
}

MessageGraph MessageGraph::from_subgraph(const Subgraph& sub, bool binarize, bool gcn_self_loops) {
  const auto& a = sub.adj();
  Index dst, src;
  std::vector<double> w;
  dst.reserve(a.nnz());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const auto cols = a.row_cols(r);
    const auto vals = a.row_values(r);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      dst.push_back(static_cast<std::uint32_t>(r));
      src.push_back(cols[k]);
      w.push_back(binarize ? 1.0 : static_cast<double>(vals[k]));
    }
  }
  const bool square = sub.src_type == sub.dst_type;
  return MessageGraph(a.rows(), a.cols(), square, std::move(dst), std::move(src), std::move(w), {}, 1,
                      gcn_self_loops);
}

MessageGraph MessageGraph::from_homograph(const HomoGraph& homo, bool binarize, bool gcn_self_loops) {
  const auto m = homo.num_edges();
  std::vector<double> w(m);
  Index types(m);
  for (std::size_t r = 0; r < homo.num_relations(); ++r)
    for (auto e = homo.relation_offsets[r]; e < homo.relation_offsets[r + 1]; ++e)
      types[e] = static_cast<std::uint32_t>(r);
  for (std::size_t e = 0; e < m; ++e) w[e] = binarize ? 1.0 : static_cast<double>(homo.edge_count[e]);
  return MessageGraph(homo.num_nodes(), homo.num_nodes(), true, homo.edge_dst, homo.edge_src, std::move(w),
                      std::move(types), homo.num_relations(), gcn_self_loops);
}

// ---------------------------------------------------------------------------
// Dense building blocks

Linear::Linear(ParameterStore& store, Initializer& init, const std::string& name, std::size_t in_dim,
               std::size_t out_dim, bool bias)
    : in_dim_(in_dim), out_dim_(out_dim) {
  weight_ = store.add(name + ".weight", init.glorot(in_dim, out_dim));
  if (bias) bias_ = store.add(name + ".bias", Matrix(1, out_dim));
}

Tensor Linear::forward(const Tensor& x) const {
  auto y = matmul(x, weight_);
  return bias_.defined() ? add_row(y, bias_) : y;
}

Tensor apply_activation(Activation kind, const Tensor& x, const Tensor& prelu_slope) {
  switch (kind) {
    case Activation::Relu: return relu(x);
    case Activation::LeakyRelu: return leaky_relu(x, 0.01);
    case Activation::Elu: return elu(x, 1.0);
    case Activation::Tanh: return tanh(x);
    case Activation::PRelu:
      if (!prelu_slope.defined()) throw Error("PReLU activation needs a slope parameter");
      return prelu(x, prelu_slope);
  }
  throw Error("unknown activation");
}

ActivationLayer::ActivationLayer(ParameterStore& store, const std::string& name, Activation kind) : kind_(kind) {
  if (kind == Activation::PRelu) slope_ = store.add(name + ".slope", Matrix(1, 1, 0.25));
}

Tensor ActivationLayer::forward(const Tensor& x) const { return apply_activation(kind_, x, slope_); }

HeteroLinear::HeteroLinear(ParameterStore& store, Initializer& init, const std::string& name,
                           std::span<const NodeType> types, std::size_t out_dim, bool bias)
    : types_(types.begin(), types.end()), out_dim_(out_dim) {
  weights_.resize(types_.size());
  biases_.resize(types_.size());
  embeddings_.resize(types_.size());
  for (std::size_t t = 0; t < types_.size(); ++t) {
    const auto& nt = types_[t];
    const std::string base = name + "." + nt.name;
    if (nt.feature_dim == 0) {
      embeddings_[t] =
          store.add(base + ".embedding", init.normal(nt.count, out_dim, 1.0 / std::sqrt(static_cast<double>(out_dim))));
      continue;
    }
    weights_[t] = store.add(base + ".weight", init.glorot(nt.feature_dim, out_dim));
    if (bias) biases_[t] = store.add(base + ".bias", Matrix(1, out_dim));
  }
}

std::vector<Tensor> HeteroLinear::forward(const std::vector<Tensor>& features_by_type) const {
  if (features_by_type.size() != types_.size()) throw Error("hetero linear: one input per node type expected");
  std::vector<Tensor> out(types_.size());
  for (std::size_t t = 0; t < types_.size(); ++t) {
    if (embeddings_[t].defined()) {
      out[t] = embeddings_[t];
      continue;
    }
    const auto& x = features_by_type[t];
    if (!x.defined() || x.cols() != types_[t].feature_dim)
      throw Error("hetero linear: features of type '" + types_[t].name + "' have the wrong width");
    auto y = matmul(x, weights_[t]);
    out[t] = biases_[t].defined() ? add_row(y, biases_[t]) : y;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Micro convolutions

MicroConv::MicroConv(ParameterStore& store, Initializer& init, const std::string& name, ConvKind kind,
                     std::size_t in_dim, std::size_t out_dim, AttentionForm form, std::size_t num_edge_types)
    : kind_(kind), form_(form), in_dim_(in_dim), out_dim_(out_dim) {
  switch (kind) {
    case ConvKind::GCN: weight_ = store.add(name + ".weight", init.glorot(in_dim, out_dim)); break;
    case ConvKind::GAT:
      weight_ = store.add(name + ".weight", init.glorot(in_dim, out_dim));
      att_dst_ = store.add(name + ".att_dst", init.glorot(out_dim, 1));
      att_src_ = store.add(name + ".att_src", init.glorot(out_dim, 1));
      if (form == AttentionForm::SimpleHGN) {
        const auto types = std::max<std::size_t>(num_edge_types, 1);
        rel_emb_ = store.add(name + ".rel_emb", init.normal(types, out_dim, 1.0 / std::sqrt(double(out_dim))));
        rel_proj_ = store.add(name + ".rel_proj", init.glorot(out_dim, out_dim));
        att_rel_ = store.add(name + ".att_rel", init.glorot(out_dim, 1));
      }
      break;
    case ConvKind::Sage:
      weight_ = store.add(name + ".weight", init.glorot(2 * in_dim, out_dim));
      bias_ = store.add(name + ".bias", Matrix(1, out_dim));
      break;
    case ConvKind::GIN:
      gin_eps_ = store.add(name + ".eps", Matrix(1, 1, 0.0));
      gin_hidden_.emplace(store, init, name + ".mlp0", in_dim, out_dim);
      gin_out_.emplace(store, init, name + ".mlp1", out_dim, out_dim);
      break;
  }
}

std::vector<Tensor> MicroConv::parameters() const {
  std::vector<Tensor> out;
  for (const auto* t : {&weight_, &bias_, &att_dst_, &att_src_, &rel_emb_, &rel_proj_, &att_rel_, &gin_eps_})
    if (t->defined()) out.push_back(*t);
  for (const auto* mlp : {&gin_hidden_, &gin_out_})
    if (mlp->has_value()) {
      out.push_back((*mlp)->weight());
      if ((*mlp)->bias().defined()) out.push_back((*mlp)->bias());
    }
  return out;
}

Tensor MicroConv::forward(const MessageGraph& graph, const Tensor& h_src, const Tensor& h_dst,
                          Tensor* attention) const {
  if (h_src.rows() != graph.num_src() || h_dst.rows() != graph.num_dst())
    throw Error("micro conv: feature rows do not match the message graph");
  if (h_src.cols() != in_dim_ || h_dst.cols() != in_dim_) throw Error("micro conv: input width mismatch");
  const bool shared = h_src.node() == h_dst.node();

  switch (kind_) {
    case ConvKind::GCN: return matmul(spmm(graph.gcn_operator(), h_src), weight_);
    case ConvKind::Sage: {
      auto neigh = spmm(graph.mean_operator(), h_src);
      return add_row(matmul(concat({h_dst, neigh}, 1), weight_), bias_);
    }
    case ConvKind::GIN: {
      auto self = add(h_dst, mul_scalar(h_dst, gin_eps_));
      auto z = add(self, spmm(graph.sum_operator(), h_src));
      return gin_out_->forward(relu(gin_hidden_->forward(z)));
    }
    case ConvKind::GAT: {
      auto wh_src = matmul(h_src, weight_);
      auto wh_dst = shared ? wh_src : matmul(h_dst, weight_);
      auto s_dst = matmul(wh_dst, att_dst_);
      auto s_src = matmul(wh_src, att_src_);
      auto logits = add(gather_rows(s_dst, graph.dst()), gather_rows(s_src, graph.src()));
      if (form_ == AttentionForm::SimpleHGN) {
        auto rel_score = matmul(matmul(rel_emb_, rel_proj_), att_rel_);
        logits = add(logits, gather_rows(rel_score, graph.edge_type()));
      }
      auto alpha = segment_softmax(leaky_relu(logits, 0.2), graph.dst(), graph.num_dst());
      if (attention) *attention = alpha;
      auto messages = mul_rows(gather_rows(wh_src, graph.src()), alpha);
      return segment_sum(messages, graph.dst(), graph.num_dst());
    }
  }
  throw Error("unknown convolution kind");
}

Tensor micro_conv(const MicroConv& conv, const Subgraph& sub, const Tensor& h_src, const Tensor& h_dst) {
  return conv.forward(MessageGraph::from_subgraph(sub), h_src, h_dst);
}

// ---------------------------------------------------------------------------
// Macro aggregation

MacroAgg::MacroAgg(ParameterStore& store, Initializer& init, const std::string& name, MacroKind kind,
                   std::size_t dim)
    : kind_(kind) {
  if (kind != MacroKind::Attention) return;
  proj_ = store.add(name + ".proj", init.glorot(dim, dim));
  proj_bias_ = store.add(name + ".proj_bias", Matrix(1, dim));
  context_ = store.add(name + ".context", init.glorot(dim, 1));
}

Tensor MacroAgg::forward(const std::vector<Tensor>& inputs, std::vector<double>* weights) const {
  if (inputs.empty()) throw Error("macro aggregation needs at least one input");
  for (const auto& x : inputs)
    if (x.shape() != inputs.front().shape()) throw Error("macro aggregation: inputs differ in shape");
  const auto n = inputs.size();
  if (weights) weights->assign(n, 1.0 / static_cast<double>(n));
  if (n == 1) {
    if (weights) weights->assign(1, 1.0);
    return inputs.front();
  }
  switch (kind_) {
    case MacroKind::Sum: {
      auto acc = inputs[0];
      for (std::size_t i = 1; i < n; ++i) acc = add(acc, inputs[i]);
      return acc;
    }
    case MacroKind::Mean: {
      auto acc = inputs[0];
      for (std::size_t i = 1; i < n; ++i) acc = add(acc, inputs[i]);
      return scale(acc, 1.0 / static_cast<double>(n));
    }
    case MacroKind::Max: return max_n(inputs);
    case MacroKind::Attention: {
      std::vector<Tensor> scores;
      scores.reserve(n);
      for (const auto& z : inputs) {
        auto hidden = tanh(add_row(matmul(z, proj_), proj_bias_));
        scores.push_back(matmul(mean_rows(hidden), context_));
      }
      auto beta = row_softmax(concat(scores, 1));
      if (weights)
        for (std::size_t i = 0; i < n; ++i) (*weights)[i] = beta.value()(0, i);
      Tensor acc;
      for (std::size_t i = 0; i < n; ++i) {
        auto term = mul_scalar(inputs[i], slice_cols(beta, i, i + 1));
        acc = acc.defined() ? add(acc, term) : term;
      }
      return acc;
    }
  }
  throw Error("unknown macro aggregation");
}

Tensor macro_aggregate(const MacroAgg& agg, const std::vector<Tensor>& per_subgraph_outputs) {
  return agg.forward(per_subgraph_outputs);
}

// ---------------------------------------------------------------------------
// Aggregation schemes

PreparedSubgraph prepare_subgraph(const HeteroGraph& g, const Subgraph& sub, bool binarize) {
  return {sub.name, sub.origin, g.type_index(sub.src_type), g.type_index(sub.dst_type),
          MessageGraph::from_subgraph(sub, binarize)};
}

AggregateResult dual_aggregate(std::span<const PreparedSubgraph> subgraphs, std::span<const MicroConv* const> convs,
                               const MacroAgg& macro, const std::vector<Tensor>& h_by_type) {
  if (subgraphs.size() != convs.size()) throw Error("dual aggregation: one convolution per subgraph expected");
  const auto types = h_by_type.size();
  AggregateResult out;
  out.h = h_by_type;
  out.updated.assign(types, false);
  out.macro_weights.resize(types);
  out.attention.resize(subgraphs.size());

  std::vector<std::vector<Tensor>> per_type(types);
  for (std::size_t i = 0; i < subgraphs.size(); ++i) {
    const auto& sg = subgraphs[i];
    if (sg.src_type >= types || sg.dst_type >= types) throw Error("dual aggregation: subgraph type out of range");
    Tensor* att = convs[i]->kind() == ConvKind::GAT ? &out.attention[i] : nullptr;
    per_type[sg.dst_type].push_back(convs[i]->forward(sg.graph, h_by_type[sg.src_type], h_by_type[sg.dst_type], att));
  }
  for (std::size_t t = 0; t < types; ++t) {
    if (per_type[t].empty()) continue;
    out.h[t] = macro.forward(per_type[t], &out.macro_weights[t]);
    out.updated[t] = true;
  }
  return out;
}

AggregateResult direct_aggregate(const HomoGraph& homo, const MessageGraph& graph, const std::vector<Tensor>& h_by_type,
                                 const MicroConv& conv) {
  const auto types = h_by_type.size();
  if (homo.type_offsets.size() != types + 1) throw Error("direct aggregation: type count mismatch");
  auto all = types == 1 ? h_by_type.front() : concat(h_by_type, 0);
  AggregateResult out;
  out.attention.resize(1);
  Tensor* att = conv.kind() == ConvKind::GAT ? &out.attention[0] : nullptr;
  auto h = conv.forward(graph, all, all, att);
  out.h.resize(types);
  out.updated.assign(types, true);
  out.macro_weights.resize(types);
  for (std::size_t t = 0; t < types; ++t)
    out.h[t] = types == 1 ? h : slice_rows(h, homo.type_offsets[t], homo.type_offsets[t + 1]);
  return out;
}

// ---------------------------------------------------------------------------
// Post-ops and connectivity

IntraLayerPost::IntraLayerPost(ParameterStore& store, const std::string& name, std::size_t dim, PostOpsConfig config)
    : config_(config), stats_(dim) {
  if (config_.batch_norm) {
    gamma_ = store.add(name + ".bn.gamma", Matrix(1, dim, 1.0));
    beta_ = store.add(name + ".bn.beta", Matrix(1, dim, 0.0));
  }
  if (config_.activation == Activation::PRelu) prelu_slope_ = store.add(name + ".prelu", Matrix(1, 1, 0.25));
}

Tensor IntraLayerPost::forward(const Tensor& h, bool training, std::uint64_t dropout_seed) {
  auto x = h;
  if (config_.batch_norm) x = batch_norm(x, gamma_, beta_, stats_, training);
  if (config_.dropout > 0.0) x = dropout(x, config_.dropout, training, dropout_seed);
  if (config_.activation) x = apply_activation(*config_.activation, x, prelu_slope_);
  if (config_.l2_norm) x = l2_normalize_rows(x);
  return x;
}

Tensor connect(Connectivity mode, const Tensor& h_prev, const Tensor& h_new) {
  if (h_prev.rows() != h_new.rows()) throw Error("connect: row counts differ");
  switch (mode) {
    case Connectivity::Stack: return h_new;
    case Connectivity::SkipSum: return add(h_prev, h_new);
    case Connectivity::SkipCat: return concat({h_prev, h_new}, 1);
  }
  throw Error("unknown connectivity");
}

}  // namespace hgnn
