#pragma once

// Independent reference implementations used by the unit and acceptance
// tests. Everything here works on raw edge lists or dense arrays and never
// calls the sparse kernels under test.

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hgnn/common.hpp"
#include "hgnn/hgraph.hpp"
#include "hgnn/matrix.hpp"
#include "hgnn/transform.hpp"

namespace oracle {

using hgnn::Edge;
using hgnn::HeteroGraph;
using hgnn::Matrix;
using hgnn::Rng;

using Dense = std::vector<std::vector<std::int64_t>>;

/// Random heterogeneous graph: 1..max_types node types, up to max_nodes
/// nodes in total, 1..max_relations relations between random type pairs,
/// duplicate edges allowed.
inline HeteroGraph random_graph(Rng& rng, std::size_t max_nodes = 50, std::size_t max_types = 4,
                                std::size_t max_relations = 6, std::size_t feature_dim = 0,
                                std::size_t num_classes = 0) {
  const auto num_types = 1 + hgnn::uniform_index(rng, max_types);
  std::vector<std::size_t> counts(num_types, 1);
  const auto budget = std::max<std::size_t>(max_nodes, num_types);
  for (std::size_t extra = budget - num_types, k = hgnn::uniform_index(rng, extra + 1); k > 0; --k)
    ++counts[hgnn::uniform_index(rng, num_types)];

  std::vector<hgnn::NodeType> types;
  for (std::size_t t = 0; t < num_types; ++t) types.push_back({"t" + std::to_string(t), counts[t], feature_dim});

  const auto num_rel = 1 + hgnn::uniform_index(rng, max_relations);
  std::vector<hgnn::Relation> rels;
  std::vector<std::vector<Edge>> edges;
  for (std::size_t r = 0; r < num_rel; ++r) {
    const auto s = hgnn::uniform_index(rng, num_types);
    const auto d = hgnn::uniform_index(rng, num_types);
    rels.push_back({"r" + std::to_string(r), types[s].name, types[d].name});
    std::vector<Edge> list;
    const auto m = hgnn::uniform_index(rng, 2 * (counts[s] + counts[d]) + 1);
    for (std::size_t e = 0; e < m; ++e)
      list.push_back({static_cast<std::uint32_t>(hgnn::uniform_index(rng, counts[s])),
                      static_cast<std::uint32_t>(hgnn::uniform_index(rng, counts[d])),
                      static_cast<std::int64_t>(1 + hgnn::uniform_index(rng, 2))});
    edges.push_back(std::move(list));
  }

  std::vector<Matrix> features;
  if (feature_dim > 0)
    for (const auto& t : types) {
      Matrix f(t.count, feature_dim);
      for (auto& x : f.data()) x = hgnn::standard_normal(rng);
      features.push_back(std::move(f));
    }
  std::vector<std::vector<int>> labels;
  if (num_classes > 0)
    for (const auto& t : types) {
      std::vector<int> y(t.count);
      for (auto& v : y) v = static_cast<int>(hgnn::uniform_index(rng, num_classes));
      labels.push_back(std::move(y));
    }
  return hgnn::build_graph(types, rels, edges, features, labels);
}

/// Random chaining meta-path of 1..max_len relations, if the graph has any.
inline std::optional<hgnn::MetaPath> random_metapath(const HeteroGraph& g, Rng& rng, std::size_t max_len = 3) {
  const auto len = 1 + hgnn::uniform_index(rng, max_len);
  std::vector<std::string> chain;
  auto r = hgnn::uniform_index(rng, g.num_relations());
  chain.push_back(g.relation(r).name);
  while (chain.size() < len) {
    std::vector<std::size_t> next;
    for (std::size_t k = 0; k < g.num_relations(); ++k)
      if (g.relation(k).src_type == g.relation(r).dst_type) next.push_back(k);
    if (next.empty()) break;
    r = next[hgnn::uniform_index(rng, next.size())];
    chain.push_back(g.relation(r).name);
  }
  return hgnn::MetaPath{"mp", chain};
}

/// Raw (src, dst, count) triples of a relation, straight from the graph's
/// edge list accessor (no matrix arithmetic).
inline std::vector<Edge> raw_edges(const HeteroGraph& g, const std::string& relation) {
  return g.edges(g.relation_index(relation));
}

/// Instance counts of a meta-path by depth-first enumeration of every walk.
/// Result is indexed [dst][src].
inline Dense count_paths(const HeteroGraph& g, const hgnn::MetaPath& mp) {
  std::vector<std::vector<Edge>> steps;
  for (const auto& r : mp.relations) steps.push_back(raw_edges(g, r));
  const auto& first = g.relation(g.relation_index(mp.relations.front()));
  const auto& last = g.relation(g.relation_index(mp.relations.back()));
  const auto ns = g.node_type(g.type_index(first.src_type)).count;
  const auto nd = g.node_type(g.type_index(last.dst_type)).count;
  Dense out(nd, std::vector<std::int64_t>(ns, 0));

  std::function<void(std::size_t, std::size_t, std::uint32_t, std::int64_t)> walk =
      [&](std::size_t start, std::size_t step, std::uint32_t node, std::int64_t mult) {
        if (step == steps.size()) {
          out[node][start] += mult;
          return;
        }
        for (const auto& e : steps[step])
          if (e.src == node) walk(start, step + 1, e.dst, mult * e.count);
      };
  for (std::size_t u = 0; u < ns; ++u) walk(u, 0, static_cast<std::uint32_t>(u), 1);
  return out;
}

inline Dense to_dense(const hgnn::CsrMatrix& m) {
  Dense out(m.rows(), std::vector<std::int64_t>(m.cols(), 0));
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto cols = m.row_cols(r);
    const auto vals = m.row_values(r);
    for (std::size_t k = 0; k < cols.size(); ++k) out[r][cols[k]] = vals[k];
  }
  return out;
}

inline Dense dense_product(const Dense& a, const Dense& b) {
  const auto n = a.size();
  const auto k = b.size();
  const auto m = k == 0 ? 0 : b[0].size();
  Dense out(n, std::vector<std::int64_t>(m, 0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t l = 0; l < k; ++l) out[i][j] += a[i][l] * b[l][j];
  return out;
}

/// Homophily by scanning a dense adjacency: for each labelled centre v with
/// at least one labelled neighbour u (A[v][u] >= 1), the fraction sharing v's
/// label; averaged over such centres.
inline double homophily(const Dense& a, const std::vector<int>& labels, bool include_self) {
  double total = 0.0;
  std::size_t counted = 0;
  for (std::size_t v = 0; v < a.size(); ++v) {
    if (labels[v] < 0) continue;
    std::size_t n = 0, same = 0;
    for (std::size_t u = 0; u < a[v].size(); ++u) {
      if (a[v][u] < 1 || labels[u] < 0 || (!include_self && u == v)) continue;
      ++n;
      same += labels[u] == labels[v];
    }
    if (n == 0) continue;
    total += static_cast<double>(same) / static_cast<double>(n);
    ++counted;
  }
  return counted == 0 ? 0.0 : total / static_cast<double>(counted);
}

/// Dense real-valued matrix helpers for layer oracles.
inline Matrix dense_matmul(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      out(i, j) = s;
    }
  return out;
}

inline Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
  Matrix m(rows, cols);
  for (auto& x : m.data()) x = scale * hgnn::standard_normal(rng);
  return m;
}

/// Relabels the nodes of every type with a random permutation. perm[t][old]
/// is the new id of node old of type t.
struct Permuted {
  HeteroGraph graph;
  std::vector<std::vector<std::size_t>> perm;
};

inline Permuted permute_graph(const HeteroGraph& g, Rng& rng) {
  Permuted out;
  for (std::size_t t = 0; t < g.num_types(); ++t) {
    std::vector<std::size_t> p(g.node_type(t).count);
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = i;
    hgnn::shuffle(p, rng);
    out.perm.push_back(std::move(p));
  }
  std::vector<std::vector<Edge>> edges;
  for (std::size_t r = 0; r < g.num_relations(); ++r) {
    std::vector<Edge> list;
    for (const auto& e : g.edges(r))
      list.push_back({static_cast<std::uint32_t>(out.perm[g.relation_src(r)][e.src]),
                      static_cast<std::uint32_t>(out.perm[g.relation_dst(r)][e.dst]), e.count});
    edges.push_back(std::move(list));
  }
  std::vector<Matrix> features;
  std::vector<std::vector<int>> labels;
  bool any_labels = false;
  for (std::size_t t = 0; t < g.num_types(); ++t) any_labels = any_labels || g.has_labels(t);
  for (std::size_t t = 0; t < g.num_types(); ++t) {
    const auto& f = g.features(t);
    Matrix pf(f.rows(), f.cols());
    for (std::size_t i = 0; i < f.rows(); ++i)
      for (std::size_t c = 0; c < f.cols(); ++c) pf(out.perm[t][i], c) = f(i, c);
    features.push_back(std::move(pf));
    if (any_labels) {
      std::vector<int> y;
      if (g.has_labels(t)) {
        y.assign(g.labels(t).size(), 0);
        for (std::size_t i = 0; i < y.size(); ++i) y[out.perm[t][i]] = g.labels(t)[i];
      }
      labels.push_back(std::move(y));
    }
  }
  bool featured = false;
  for (const auto& t : g.node_types()) featured = featured || t.feature_dim > 0;
  if (!featured) features.clear();
  out.graph = hgnn::build_graph(g.node_types(), g.relations(), edges, features, labels);
  return out;
}

}  // namespace oracle
