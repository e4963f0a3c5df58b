#include "hgnn/model.hpp"

#include <cmath>

#include "hgnn/common.hpp"

namespace hgnn {

namespace {

constexpr std::uint64_t kInitStream = 0x1417;
constexpr std::uint64_t kDropoutStream = 0xd20f;

std::string join_errors(const std::vector<std::string>& errors) {
  std::string out;
  for (const auto& e : errors) out += (out.empty() ? "" : "; ") + e;
  return out;
}

}  // namespace

Model::Model(const DesignConfig& cfg, const HeteroGraph& g) : cfg_(cfg), types_(g.node_types()), relations_(g.relations()) {
  if (auto errors = validate(cfg, full_space(), &g); !errors.empty())
    throw Error("invalid config: " + join_errors(errors));

  const auto hidden = static_cast<std::size_t>(cfg.hidden_dim);
  const auto layers = static_cast<std::size_t>(cfg.mp_layers);
  if (cfg.task.kind == TaskKind::NodeClassification) {
    target_ = g.type_index(cfg.task.target);
    num_classes_ = cfg.task.num_classes ? cfg.task.num_classes : g.num_classes(target_);
    if (num_classes_ < 2) throw Error("node classification needs at least two classes");
    output_types_ = {target_};
  } else {
    target_ = g.relation_index(cfg.task.target);
    output_types_ = {g.relation_src(target_)};
    if (g.relation_dst(target_) != output_types_.front()) output_types_.push_back(g.relation_dst(target_));
  }

  Initializer init(derive_seed(cfg.seed, kInitStream));
  bind(g);

  hetero_linear_ = std::make_unique<HeteroLinear>(store_, init, "pre0", types_, hidden);
  for (int k = 1; k < cfg.pre_layers; ++k) {
    const auto name = "pre" + std::to_string(k);
    std::vector<std::unique_ptr<Linear>> block;
    for (const auto& t : types_) block.push_back(std::make_unique<Linear>(store_, init, name + "." + t.name, hidden, hidden));
    pre_blocks_.push_back(std::move(block));
    pre_acts_.push_back(std::make_unique<ActivationLayer>(store_, name + ".act", cfg.activation));
  }

  mp_param_begin_ = store_.all().size();
  const PostOpsConfig post_ops{cfg.batch_norm, cfg.dropout, cfg.activation, cfg.l2_norm};
  for (std::size_t l = 0; l < layers; ++l) {
    const auto name = "mp" + std::to_string(l);
    const auto in = cfg.connectivity == Connectivity::SkipCat ? hidden * (l + 1) : hidden;
    MpLayer layer;
    if (cfg.family == ModelFamily::Homogenization) {
      layer.direct = std::make_unique<MicroConv>(store_, init, name + ".conv", cfg.micro, in, hidden, cfg.attention_form,
                                                 relations_.size());
    } else {
      for (const auto& sg : prepared_)
        layer.convs.push_back(
            std::make_unique<MicroConv>(store_, init, name + "." + sg.name, cfg.micro, in, hidden, cfg.attention_form, 1));
      layer.macro = std::make_unique<MacroAgg>(store_, init, name + ".macro", *cfg.macro, hidden);
    }
    for (const auto& t : types_)
      layer.post.push_back(std::make_unique<IntraLayerPost>(store_, name + ".post." + t.name, hidden, post_ops));
    mp_.push_back(std::move(layer));
  }
  mp_param_end_ = store_.all().size();

  post_input_width_ = cfg.connectivity == Connectivity::SkipCat ? hidden * (layers + 1) : hidden;
  for (int k = 0; k < cfg.post_layers; ++k) {
    const auto name = "post" + std::to_string(k);
    post_.push_back(std::make_unique<Linear>(store_, init, name, k == 0 ? post_input_width_ : hidden, hidden));
    const bool last = k + 1 == cfg.post_layers;
    if (last && cfg.task.kind == TaskKind::LinkPrediction)
      post_acts_.push_back(nullptr);
    else
      post_acts_.push_back(std::make_unique<ActivationLayer>(store_, name + ".act", cfg.activation));
  }
  if (cfg.task.kind == TaskKind::NodeClassification)
    head_ = std::make_unique<Linear>(store_, init, "head", hidden, num_classes_);
}

void Model::bind(const HeteroGraph& g) {
  if (g.node_types() != types_ || g.relations() != relations_)
    throw Error("model: graph schema differs from the one the model was built for");
  features_.assign(types_.size(), Tensor());
  for (std::size_t t = 0; t < types_.size(); ++t)
    if (types_[t].feature_dim > 0) features_[t] = Tensor::constant(g.features(t));

  prepared_.clear();
  if (cfg_.family == ModelFamily::Homogenization) {
    homo_ = homogenize(g);
    homo_graph_ = MessageGraph::from_homograph(homo_);
    return;
  }
  std::vector<Subgraph> subs;
  if (cfg_.family == ModelFamily::Relation) {
    std::vector<std::string> names;
    for (const auto& r : relations_) names.push_back(r.name);
    subs = extract_relation_subgraphs(g, names);
  } else {
    for (const auto& mp : cfg_.metapaths) subs.push_back(compose_metapath(g, mp));
  }
  for (const auto& s : subs) prepared_.push_back(prepare_subgraph(g, s));
}

ModelOutput Model::forward(bool training, std::uint64_t step) {
  const auto hidden = static_cast<std::size_t>(cfg_.hidden_dim);
  std::uint64_t call = 0;
  const auto stream = derive_seed(cfg_.seed, kDropoutStream);
  auto next_seed = [&] { return derive_seed(stream, step, call++); };

  auto h = hetero_linear_->forward(features_);
  for (std::size_t k = 0; k < pre_blocks_.size(); ++k)
    for (std::size_t t = 0; t < types_.size(); ++t) h[t] = pre_acts_[k]->forward(pre_blocks_[k][t]->forward(h[t]));

  for (auto& layer : mp_) {
    AggregateResult agg;
    if (layer.direct) {
      agg = direct_aggregate(homo_, homo_graph_, h, *layer.direct);
    } else {
      std::vector<const MicroConv*> convs;
      for (const auto& c : layer.convs) convs.push_back(c.get());
      agg = dual_aggregate(prepared_, convs, *layer.macro, h);
    }
    for (std::size_t t = 0; t < types_.size(); ++t) {
      if (agg.updated[t]) {
        auto x = layer.post[t]->forward(agg.h[t], training, next_seed());
        h[t] = connect(cfg_.connectivity, h[t], x);
      } else if (cfg_.connectivity == Connectivity::SkipCat) {
        h[t] = concat({h[t], Tensor::constant(Matrix(h[t].rows(), hidden))}, 1);
      }
    }
  }

  ModelOutput out;
  out.h.assign(types_.size(), Tensor());
  for (auto t : output_types_) {
    auto x = h[t];
    for (std::size_t k = 0; k < post_.size(); ++k) {
      x = post_[k]->forward(x);
      if (post_acts_[k]) x = post_acts_[k]->forward(x);
    }
    out.h[t] = x;
  }
  if (head_) out.logits = head_->forward(out.h[target_]);
  return out;
}

Tensor Model::link_logits(const ModelOutput& out, const std::vector<Edge>& pairs) const {
  if (cfg_.task.kind != TaskKind::LinkPrediction) throw Error("link scores need a link prediction model");
  const auto& rel = relations_[target_];
  const auto src_type = output_types_.front();
  const auto dst_type = output_types_.back();
  Index src, dst;
  src.reserve(pairs.size());
  dst.reserve(pairs.size());
  for (const auto& e : pairs) {
    if (e.src >= types_[src_type].count || e.dst >= types_[dst_type].count)
      throw Error("link pair out of range for relation '" + rel.name + "'");
    src.push_back(e.src);
    dst.push_back(e.dst);
  }
  return row_dot(gather_rows(out.h[src_type], src), gather_rows(out.h[dst_type], dst));
}

std::size_t Model::num_mp_parameters() const {
  std::size_t n = 0;
  for (std::size_t i = mp_param_begin_; i < mp_param_end_; ++i) n += store_.all()[i].tensor.value().size();
  return n;
}

std::vector<double> score_links(const Matrix& h_src, const Matrix& h_dst, const std::vector<std::uint32_t>& src_ids,
                                const std::vector<std::uint32_t>& dst_ids) {
  if (src_ids.size() != dst_ids.size()) throw Error("score_links: id lists differ in length");
  if (h_src.cols() != h_dst.cols()) throw Error("score_links: embedding widths differ");
  std::vector<double> out(src_ids.size());
  for (std::size_t i = 0; i < src_ids.size(); ++i) {
    if (src_ids[i] >= h_src.rows() || dst_ids[i] >= h_dst.rows()) throw Error("score_links: node id out of range");
    double dot = 0.0;
    for (std::size_t c = 0; c < h_src.cols(); ++c) dot += h_src(src_ids[i], c) * h_dst(dst_ids[i], c);
    out[i] = 1.0 / (1.0 + std::exp(-dot));
  }
  return out;
}

}  // namespace hgnn
