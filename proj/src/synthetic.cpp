#include "hgnn/synthetic.hpp"

#include <map>

#include "hgnn/common.hpp"

namespace hgnn {

void validate(const SyntheticSpec& spec) {
  auto in_unit = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (spec.node_types.empty()) throw Error("synthetic spec: no node types");
  if (spec.communities == 0) throw Error("synthetic spec: communities must be positive");
  if (!in_unit(spec.boost)) throw Error("synthetic spec: boost must lie in [0,1]");
  if (!in_unit(spec.label_noise)) throw Error("synthetic spec: label_noise must lie in [0,1]");
  if (spec.feature_noise < 0.0) throw Error("synthetic spec: feature_noise must be non-negative");
  bool target_found = spec.target_type.empty();
  for (const auto& t : spec.node_types) {
    if (t.count == 0) throw Error("synthetic spec: node type '" + t.name + "' needs a positive count");
    target_found = target_found || t.name == spec.target_type;
  }
  if (!target_found) throw Error("synthetic spec: unknown target type '" + spec.target_type + "'");
  for (const auto& r : spec.relations)
    if (r.edges == 0) throw Error("synthetic spec: relation '" + r.name + "' needs a positive edge count");
}

HeteroGraph generate_synthetic(const SyntheticSpec& spec) {
  validate(spec);
  Rng rng(spec.seed);
  const std::size_t k = spec.communities;

  std::vector<NodeType> types;
  std::map<std::string, std::size_t> type_of;
  std::vector<std::vector<std::uint32_t>> community;             // per type, per node
  std::vector<std::vector<std::vector<std::uint32_t>>> members;  // per type, per community
  for (std::size_t t = 0; t < spec.node_types.size(); ++t) {
    const auto& st = spec.node_types[t];
    types.push_back({st.name, st.count, st.feature_dim});
    type_of[st.name] = t;
    std::vector<std::uint32_t> c(st.count);
    for (std::size_t i = 0; i < st.count; ++i) c[i] = static_cast<std::uint32_t>(i % k);
    shuffle(c, rng);
    std::vector<std::vector<std::uint32_t>> m(k);
    for (std::size_t i = 0; i < st.count; ++i) m[c[i]].push_back(static_cast<std::uint32_t>(i));
    community.push_back(std::move(c));
    members.push_back(std::move(m));
  }

  std::vector<Relation> relations;
  std::vector<std::vector<Edge>> edge_lists;
  for (const auto& sr : spec.relations) {
    const auto src_it = type_of.find(sr.src_type);
    const auto dst_it = type_of.find(sr.dst_type);
    if (src_it == type_of.end() || dst_it == type_of.end())
      throw Error("synthetic spec: relation '" + sr.name + "' references an unknown type");
    const std::size_t s = src_it->second;
    const std::size_t d = dst_it->second;
    std::vector<Edge> edges;
    edges.reserve(sr.edges);
    for (std::size_t e = 0; e < sr.edges; ++e) {
      const auto src = static_cast<std::uint32_t>(uniform_index(rng, spec.node_types[s].count));
      const auto& pool = members[d][community[s][src]];
      std::uint32_t dst;
      if (uniform01(rng) < spec.boost && !pool.empty()) {
        dst = pool[uniform_index(rng, pool.size())];
      } else {
        dst = static_cast<std::uint32_t>(uniform_index(rng, spec.node_types[d].count));
      }
      edges.push_back({src, dst, 1});
    }
    relations.push_back({sr.name, sr.src_type, sr.dst_type});
    if (!sr.reverse_name.empty()) {
      std::vector<Edge> mirrored;
      mirrored.reserve(edges.size());
      for (const auto& e : edges) mirrored.push_back({e.dst, e.src, e.count});
      edge_lists.push_back(std::move(edges));
      relations.push_back({sr.reverse_name, sr.dst_type, sr.src_type});
      edge_lists.push_back(std::move(mirrored));
    } else {
      edge_lists.push_back(std::move(edges));
    }
  }

  std::vector<Matrix> features;
  for (std::size_t t = 0; t < types.size(); ++t) {
    const std::size_t dim = types[t].feature_dim;
    Matrix centroids(k, dim);
    for (auto& v : centroids.data()) v = spec.feature_signal * standard_normal(rng);
    Matrix f(types[t].count, dim);
    for (std::size_t i = 0; i < types[t].count; ++i)
      for (std::size_t j = 0; j < dim; ++j)
        f(i, j) = centroids(community[t][i], j) + spec.feature_noise * standard_normal(rng);
    features.push_back(std::move(f));
  }

  std::vector<std::vector<int>> labels(types.size());
  if (!spec.target_type.empty()) {
    const std::size_t t = type_of.at(spec.target_type);
    labels[t].resize(types[t].count);
    for (std::size_t i = 0; i < types[t].count; ++i) {
      int y = static_cast<int>(community[t][i]);
      if (spec.label_noise > 0.0 && uniform01(rng) < spec.label_noise) y = static_cast<int>(uniform_index(rng, k));
      labels[t][i] = y;
    }
  }
  return build_graph(std::move(types), std::move(relations), std::move(edge_lists), std::move(features),
                     std::move(labels));
}

SyntheticSpec academic_spec(std::size_t papers, std::size_t authors, std::size_t edges, double boost,
                            std::uint64_t seed) {
  SyntheticSpec spec;
  spec.node_types = {{"paper", papers, 16}, {"author", authors, 8}};
  spec.relations = {{"writes", "author", "paper", edges, "written_by"}};
  spec.target_type = "paper";
  spec.communities = 4;
  spec.boost = boost;
  spec.feature_signal = 1.0;
  spec.feature_noise = 2.0;
  spec.seed = seed;
  return spec;
}

}  // namespace hgnn
