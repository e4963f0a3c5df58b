#pragma once

#include <memory>
#include <string>
#include <vector>

#include "hgnn/hgraph.hpp"

namespace hgnn {

/// Ordered chain of relation names; consecutive relations must chain
/// (destination type of step i == source type of step i+1).
struct MetaPath {
  std::string name;
  std::vector<std::string> relations;

  bool operator==(const MetaPath&) const = default;
};

enum class SubgraphOrigin { Relation, MetaPath };

/// A single count adjacency (rows = destination nodes of dst_type, columns =
/// source nodes of src_type) selected from a heterogeneous graph.
struct Subgraph {
  SubgraphOrigin origin = SubgraphOrigin::Relation;
  std::string name;
  std::string src_type;
  std::string dst_type;
  std::shared_ptr<const CsrMatrix> adjacency;

  const CsrMatrix& adj() const { return *adjacency; }
};

/// Flattened view of a heterogeneous graph over global node ids. Edges are
/// stored in contiguous per-relation blocks (relation order, then the
/// relation's canonical edge order), so the edge type is an offset lookup.
struct HomoGraph {
  std::vector<std::size_t> type_offsets;      // size types + 1; global id base per type
  std::vector<std::uint32_t> node_type_of;    // global id -> type index
  std::vector<std::size_t> relation_offsets;  // size relations + 1; edge id base per relation
  std::vector<std::uint32_t> edge_src;        // global ids
  std::vector<std::uint32_t> edge_dst;
  std::vector<std::int64_t> edge_count;       // multiplicity of each stored edge
  CsrMatrix adjacency;                        // num_nodes x num_nodes, dst-major, summed counts

  std::size_t num_nodes() const { return node_type_of.size(); }
  std::size_t num_edges() const { return edge_src.size(); }
  std::size_t num_relations() const { return relation_offsets.size() - 1; }
  std::size_t edge_type_of(std::size_t edge) const;
  std::size_t global_id(std::size_t type, std::size_t local) const { return type_offsets[type] + local; }
  /// (type, local id) of a global id.
  std::pair<std::size_t, std::size_t> local_id(std::size_t global) const;
};

std::vector<Subgraph> extract_relation_subgraphs(const HeteroGraph& g, const std::vector<std::string>& relation_names);

/// Path-count adjacency of a meta-path. With dst-major storage the product
/// is A_{r_l} ... A_{r_1}; entry (v, u) counts meta-path instances u -> v.
/// Throws Error naming the first pair of relations that does not chain.
Subgraph compose_metapath(const HeteroGraph& g, const MetaPath& mp);

/// Throws Error describing the chaining defect, if any.
void check_metapath(const HeteroGraph& g, const MetaPath& mp);

HomoGraph homogenize(const HeteroGraph& g);

/// Relation subgraphs followed by meta-path subgraphs, in the given order.
std::vector<Subgraph> extract_mixed(const HeteroGraph& g, const std::vector<std::string>& relation_names,
                                    const std::vector<MetaPath>& metapaths);

struct HomophilyOptions {
  /// Count u == v entries (e.g. the diagonal of P-A-P) as neighbours.
  bool include_self = false;
};

/// Average over nodes with at least one neighbour of the fraction of
/// neighbours sharing the node's label. Neighbours of v are the u with
/// A[v, u] >= 1. Unlabeled nodes (kUnlabeled) are skipped as centres and as
/// neighbours. Requires src_type == dst_type.
double homophily(const Subgraph& sub, const std::vector<int>& labels, HomophilyOptions options = {});

}  // namespace hgnn
