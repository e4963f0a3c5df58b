#include "hgnn/transform.hpp"

#include <algorithm>

#include "hgnn/common.hpp"

namespace hgnn {

std::size_t HomoGraph::edge_type_of(std::size_t edge) const {
  if (edge >= num_edges()) throw Error("edge id out of range");
  const auto it = std::upper_bound(relation_offsets.begin(), relation_offsets.end(), edge);
  return static_cast<std::size_t>(it - relation_offsets.begin()) - 1;
}

std::pair<std::size_t, std::size_t> HomoGraph::local_id(std::size_t global) const {
  if (global >= num_nodes()) throw Error("global node id out of range");
  const std::size_t t = node_type_of[global];
  return {t, global - type_offsets[t]};
}

std::vector<Subgraph> extract_relation_subgraphs(const HeteroGraph& g,
                                                 const std::vector<std::string>& relation_names) {
  std::vector<Subgraph> out;
  out.reserve(relation_names.size());
  for (const auto& name : relation_names) {
    const auto r = g.relation_index(name);
    const auto& rel = g.relation(r);
    out.push_back({SubgraphOrigin::Relation, rel.name, rel.src_type, rel.dst_type, g.shared_adjacency(r)});
  }
  return out;
}

void check_metapath(const HeteroGraph& g, const MetaPath& mp) {
  if (mp.relations.empty()) throw Error("meta-path '" + mp.name + "' has no relations");
  for (std::size_t i = 0; i < mp.relations.size(); ++i) {
    const auto r = g.find_relation(mp.relations[i]);
    if (!r) throw Error("meta-path '" + mp.name + "': unknown relation '" + mp.relations[i] + "'");
    if (i == 0) continue;
    const auto& prev = g.relation(g.relation_index(mp.relations[i - 1]));
    const auto& cur = g.relation(*r);
    if (prev.dst_type != cur.src_type) {
      throw Error("meta-path '" + mp.name + "': '" + prev.name + "' ends at " + prev.dst_type + " but '" +
                  cur.name + "' starts at " + cur.src_type);
    }
  }
}

Subgraph compose_metapath(const HeteroGraph& g, const MetaPath& mp) {
  check_metapath(g, mp);
  const auto first = g.relation_index(mp.relations.front());
  const auto last = g.relation_index(mp.relations.back());
  std::shared_ptr<const CsrMatrix> acc = g.shared_adjacency(first);
  for (std::size_t i = 1; i < mp.relations.size(); ++i) {
    const auto r = g.relation_index(mp.relations[i]);
    acc = std::make_shared<const CsrMatrix>(multiply(g.adjacency(r), *acc));
  }
  return {SubgraphOrigin::MetaPath, mp.name, g.relation(first).src_type, g.relation(last).dst_type, acc};
}

HomoGraph homogenize(const HeteroGraph& g) {
  HomoGraph h;
  h.type_offsets.assign(g.num_types() + 1, 0);
  for (std::size_t t = 0; t < g.num_types(); ++t) {
    h.type_offsets[t + 1] = h.type_offsets[t] + g.node_type(t).count;
    for (std::size_t i = 0; i < g.node_type(t).count; ++i) h.node_type_of.push_back(static_cast<std::uint32_t>(t));
  }
  h.relation_offsets.assign(g.num_relations() + 1, 0);
  std::vector<Triplet> trip;
  for (std::size_t r = 0; r < g.num_relations(); ++r) {
    const auto src_base = h.type_offsets[g.relation_src(r)];
    const auto dst_base = h.type_offsets[g.relation_dst(r)];
    for (const auto& e : g.edges(r)) {
      h.edge_src.push_back(static_cast<std::uint32_t>(src_base + e.src));
      h.edge_dst.push_back(static_cast<std::uint32_t>(dst_base + e.dst));
      h.edge_count.push_back(e.count);
      trip.push_back({h.edge_dst.back(), h.edge_src.back(), e.count});
    }
    h.relation_offsets[r + 1] = h.edge_src.size();
  }
  h.adjacency = CsrMatrix::from_triplets(h.num_nodes(), h.num_nodes(), trip);
  return h;
}

std::vector<Subgraph> extract_mixed(const HeteroGraph& g, const std::vector<std::string>& relation_names,
                                    const std::vector<MetaPath>& metapaths) {
  auto out = extract_relation_subgraphs(g, relation_names);
  for (const auto& mp : metapaths) out.push_back(compose_metapath(g, mp));
  return out;
}

double homophily(const Subgraph& sub, const std::vector<int>& labels, HomophilyOptions options) {
  if (sub.src_type != sub.dst_type)
    throw Error("homophily: subgraph '" + sub.name + "' joins " + sub.src_type + " to " + sub.dst_type +
                "; a same-type subgraph is required");
  const auto& a = sub.adj();
  if (labels.size() != a.rows()) throw Error("homophily: labels missing for type " + sub.dst_type);
  double total = 0.0;
  std::size_t counted = 0;
  for (std::size_t v = 0; v < a.rows(); ++v) {
    if (labels[v] == kUnlabeled) continue;
    std::size_t neighbours = 0;
    std::size_t same = 0;
    for (auto u : a.row_cols(v)) {
      if (!options.include_self && u == v) continue;
      if (labels[u] == kUnlabeled) continue;
      ++neighbours;
      if (labels[u] == labels[v]) ++same;
    }
    if (neighbours == 0) continue;
    total += static_cast<double>(same) / static_cast<double>(neighbours);
    ++counted;
  }
  return counted == 0 ? 0.0 : total / static_cast<double>(counted);
}

}  // namespace hgnn
