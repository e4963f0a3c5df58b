#include "hgnn/hgraph.hpp"

#include <algorithm>
#include <set>
#include <tuple>

#include "hgnn/common.hpp"

namespace hgnn {

std::size_t HeteroGraph::num_nodes() const {
  std::size_t n = 0;
  for (const auto& t : node_types_) n += t.count;
  return n;
}

std::optional<std::size_t> HeteroGraph::find_type(std::string_view name) const {
  const auto it = type_lookup_.find(name);
  if (it == type_lookup_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> HeteroGraph::find_relation(std::string_view name) const {
  const auto it = relation_lookup_.find(name);
  if (it == relation_lookup_.end()) return std::nullopt;
  return it->second;
}

std::size_t HeteroGraph::type_index(std::string_view name) const {
  if (auto t = find_type(name)) return *t;
  throw Error("unknown node type '" + std::string(name) + "'");
}

std::size_t HeteroGraph::relation_index(std::string_view name) const {
  if (auto r = find_relation(name)) return *r;
  throw Error("unknown relation '" + std::string(name) + "'");
}

std::size_t HeteroGraph::num_classes(std::size_t t) const {
  int top = -1;
  for (int y : labels_.at(t)) top = std::max(top, y);
  return static_cast<std::size_t>(top + 1);
}

std::vector<Edge> HeteroGraph::edges(std::size_t r) const {
  const auto& a = adjacency(r);
  std::vector<Edge> out;
  out.reserve(a.nnz());
  for (std::size_t d = 0; d < a.rows(); ++d) {
    const auto cols = a.row_cols(d);
    const auto vals = a.row_values(d);
    for (std::size_t k = 0; k < cols.size(); ++k)
      out.push_back({cols[k], static_cast<std::uint32_t>(d), vals[k]});
  }
  return out;
}

bool HeteroGraph::operator==(const HeteroGraph& other) const {
  if (node_types_ != other.node_types_ || relations_ != other.relations_) return false;
  if (features_ != other.features_ || labels_ != other.labels_) return false;
  for (std::size_t r = 0; r < adjacency_.size(); ++r)
    if (*adjacency_[r] != *other.adjacency_[r]) return false;
  return true;
}

HeteroGraph build_graph(std::vector<NodeType> node_types, std::vector<Relation> relations,
                        std::vector<std::vector<Edge>> edge_lists, std::vector<Matrix> features,
                        std::vector<std::vector<int>> labels) {
  HeteroGraph g;
  for (std::size_t t = 0; t < node_types.size(); ++t) {
    const auto& nt = node_types[t];
    if (nt.name.empty()) throw Error("node type #" + std::to_string(t) + " has an empty name");
    if (!g.type_lookup_.emplace(nt.name, t).second)
      throw Error("duplicate node type '" + nt.name + "'");
    if (nt.count > std::numeric_limits<std::uint32_t>::max())
      throw Error("node type '" + nt.name + "' exceeds 2^32 nodes");
  }

  std::set<std::tuple<std::string, std::string, std::string>> triples;
  for (const auto& rel : relations) {
    if (!g.relation_lookup_.emplace(rel.name, g.rel_src_.size()).second)
      throw Error("duplicate relation name '" + rel.name + "'");
    if (!triples.emplace(rel.src_type, rel.name, rel.dst_type).second)
      throw Error("duplicate relation triple for '" + rel.name + "'");
    const auto src = g.type_lookup_.find(rel.src_type);
    const auto dst = g.type_lookup_.find(rel.dst_type);
    if (src == g.type_lookup_.end())
      throw Error("relation '" + rel.name + "': unknown source type '" + rel.src_type + "'");
    if (dst == g.type_lookup_.end())
      throw Error("relation '" + rel.name + "': unknown destination type '" + rel.dst_type + "'");
    g.rel_src_.push_back(src->second);
    g.rel_dst_.push_back(dst->second);
  }

  if (edge_lists.size() != relations.size()) {
    throw Error("expected " + std::to_string(relations.size()) + " edge lists, got " +
                std::to_string(edge_lists.size()));
  }
  for (std::size_t r = 0; r < relations.size(); ++r) {
    const auto& src_t = node_types[g.rel_src_[r]];
    const auto& dst_t = node_types[g.rel_dst_[r]];
    std::vector<Triplet> trip;
    trip.reserve(edge_lists[r].size());
    for (std::size_t e = 0; e < edge_lists[r].size(); ++e) {
      const auto& edge = edge_lists[r][e];
      if (edge.src >= src_t.count || edge.dst >= dst_t.count) {
        throw Error("relation '" + relations[r].name + "' edge #" + std::to_string(e) + " (" +
                    std::to_string(edge.src) + "->" + std::to_string(edge.dst) +
                    ") out of range for types " + src_t.name + "[" + std::to_string(src_t.count) + "] -> " +
                    dst_t.name + "[" + std::to_string(dst_t.count) + "]");
      }
      if (edge.count < 1)
        throw Error("relation '" + relations[r].name + "' edge #" + std::to_string(e) + " has count < 1");
      trip.push_back({edge.dst, edge.src, edge.count});
    }
    g.adjacency_.push_back(
        std::make_shared<const CsrMatrix>(CsrMatrix::from_triplets(dst_t.count, src_t.count, trip)));
  }

  if (features.empty()) {
    for (const auto& nt : node_types) {
      if (nt.feature_dim != 0)
        throw Error("node type '" + nt.name + "' declares feature_dim " + std::to_string(nt.feature_dim) +
                    " but no features were given");
      features.emplace_back(nt.count, 0);
    }
  }
  if (features.size() != node_types.size())
    throw Error("expected one feature matrix per node type");
  for (std::size_t t = 0; t < node_types.size(); ++t) {
    const auto& nt = node_types[t];
    if (nt.feature_dim == 0 && features[t].empty()) features[t] = Matrix(nt.count, 0);
    if (features[t].rows() != nt.count || features[t].cols() != nt.feature_dim) {
      throw Error("node type '" + nt.name + "': feature matrix is " + std::to_string(features[t].rows()) +
                  "x" + std::to_string(features[t].cols()) + ", expected " + std::to_string(nt.count) + "x" +
                  std::to_string(nt.feature_dim));
    }
  }

  if (labels.empty()) labels.resize(node_types.size());
  if (labels.size() != node_types.size()) throw Error("expected one label vector per node type");
  for (std::size_t t = 0; t < node_types.size(); ++t) {
    if (labels[t].empty()) continue;
    if (labels[t].size() != node_types[t].count)
      throw Error("node type '" + node_types[t].name + "': " + std::to_string(labels[t].size()) +
                  " labels for " + std::to_string(node_types[t].count) + " nodes");
    for (int y : labels[t])
      if (y < kUnlabeled) throw Error("node type '" + node_types[t].name + "': negative label");
  }

  g.node_types_ = std::move(node_types);
  g.relations_ = std::move(relations);
  g.features_ = std::move(features);
  g.labels_ = std::move(labels);
  return g;
}

std::vector<std::int64_t> degrees(const HeteroGraph& g, std::string_view relation, Direction direction) {
  const auto& a = g.adjacency(g.relation_index(relation));
  return direction == Direction::In ? a.row_sums() : a.col_sums();
}

HeteroGraph remove_edges(const HeteroGraph& g, std::string_view relation, const std::vector<Edge>& pairs,
                         std::string_view reverse_relation) {
  const auto rel = g.relation_index(relation);
  std::optional<std::size_t> rev;
  if (!reverse_relation.empty()) rev = g.relation_index(reverse_relation);
  std::set<std::pair<std::uint32_t, std::uint32_t>> drop;
  for (const auto& e : pairs) drop.emplace(e.src, e.dst);

  std::vector<std::vector<Edge>> lists;
  for (std::size_t r = 0; r < g.num_relations(); ++r) {
    auto edges = g.edges(r);
    if (r == rel) {
      std::erase_if(edges, [&](const Edge& e) { return drop.count({e.src, e.dst}) > 0; });
    }
    if (rev && r == *rev) {
      std::erase_if(edges, [&](const Edge& e) { return drop.count({e.dst, e.src}) > 0; });
    }
    lists.push_back(std::move(edges));
  }
  std::vector<Matrix> features;
  std::vector<std::vector<int>> labels;
  for (std::size_t t = 0; t < g.num_types(); ++t) {
    features.push_back(g.features(t));
    labels.push_back(g.labels(t));
  }
  return build_graph(g.node_types(), g.relations(), std::move(lists), std::move(features), std::move(labels));
}

}  // namespace hgnn
