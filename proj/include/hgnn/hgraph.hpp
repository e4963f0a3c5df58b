#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hgnn/common.hpp"
#include "hgnn/matrix.hpp"
#include "hgnn/sparse.hpp"

namespace hgnn {

struct NodeType {
  std::string name;
  std::size_t count = 0;
  /// 0 marks a featureless type; the model assigns it a trainable embedding.
  std::size_t feature_dim = 0;

  bool operator==(const NodeType&) const = default;
};

struct Relation {
  std::string name;
  std::string src_type;
  std::string dst_type;

  bool operator==(const Relation&) const = default;
};

/// One raw edge. Ids are dense 0-based within the endpoint's node type.
struct Edge {
  std::uint32_t src = 0;
  std::uint32_t dst = 0;
  std::int64_t count = 1;

  bool operator==(const Edge&) const = default;
};

enum class Direction { In, Out };

/// Label value for a node without a class.
inline constexpr int kUnlabeled = -1;

/// Immutable typed graph: node types, relations with per-relation count
/// adjacency (rows = destination, columns = source), per-type features and
/// optional per-type labels. Safe to share read-only across threads.
class HeteroGraph {
 public:
  HeteroGraph() = default;

  const std::vector<NodeType>& node_types() const { return node_types_; }
  const std::vector<Relation>& relations() const { return relations_; }
  std::size_t num_types() const { return node_types_.size(); }
  std::size_t num_relations() const { return relations_.size(); }
  std::size_t num_nodes() const;

  std::optional<std::size_t> find_type(std::string_view name) const;
  std::optional<std::size_t> find_relation(std::string_view name) const;
  /// Throw Error naming the missing entry.
  std::size_t type_index(std::string_view name) const;
  std::size_t relation_index(std::string_view name) const;

  const NodeType& node_type(std::size_t t) const { return node_types_.at(t); }
  const Relation& relation(std::size_t r) const { return relations_.at(r); }
  std::size_t relation_src(std::size_t r) const { return rel_src_.at(r); }
  std::size_t relation_dst(std::size_t r) const { return rel_dst_.at(r); }

  const CsrMatrix& adjacency(std::size_t r) const { return *adjacency_.at(r); }
  std::shared_ptr<const CsrMatrix> shared_adjacency(std::size_t r) const { return adjacency_.at(r); }

  const Matrix& features(std::size_t t) const { return features_.at(t); }
  bool has_labels(std::size_t t) const { return !labels_.at(t).empty(); }
  /// Empty when the type carries no labels.
  const std::vector<int>& labels(std::size_t t) const { return labels_.at(t); }
  /// max label + 1 over the type's labelled nodes (0 if none).
  std::size_t num_classes(std::size_t t) const;

  /// |types| > 1 or |relations| > 1.
  bool is_heterogeneous() const { return node_types_.size() > 1 || relations_.size() > 1; }

  /// Canonical edge list of relation r: distinct (src, dst) pairs with their
  /// multiplicity, ordered by dst then src.
  std::vector<Edge> edges(std::size_t r) const;

  bool operator==(const HeteroGraph& other) const;

 private:
  friend HeteroGraph build_graph(std::vector<NodeType>, std::vector<Relation>,
                                 std::vector<std::vector<Edge>>, std::vector<Matrix>,
                                 std::vector<std::vector<int>>);

  std::vector<NodeType> node_types_;
  std::vector<Relation> relations_;
  std::vector<std::size_t> rel_src_;
  std::vector<std::size_t> rel_dst_;
  std::vector<std::shared_ptr<const CsrMatrix>> adjacency_;
  std::vector<Matrix> features_;
  std::vector<std::vector<int>> labels_;
  std::map<std::string, std::size_t, std::less<>> type_lookup_;
  std::map<std::string, std::size_t, std::less<>> relation_lookup_;
};

/// Validates and assembles a graph. `edge_lists` has one entry per relation;
/// duplicate edges accumulate multiplicity. `features` may be empty when every
/// type is featureless, otherwise it holds one count x feature_dim matrix per
/// type. `labels` may be empty or hold one vector per type (empty vector = no
/// labels; kUnlabeled marks individual unlabeled nodes).
/// Throws Error with the offending type, relation or edge position.
HeteroGraph build_graph(std::vector<NodeType> node_types, std::vector<Relation> relations,
                        std::vector<std::vector<Edge>> edge_lists, std::vector<Matrix> features = {},
                        std::vector<std::vector<int>> labels = {});

/// In-degree (per destination node) or out-degree (per source node) of a
/// relation, counting multiplicity.
std::vector<std::int64_t> degrees(const HeteroGraph& g, std::string_view relation, Direction direction);

/// Copy of `g` with the given (src, dst) pairs removed from `relation`, and
/// their mirrors (dst, src) removed from `reverse_relation` when non-empty.
HeteroGraph remove_edges(const HeteroGraph& g, std::string_view relation, const std::vector<Edge>& pairs,
                         std::string_view reverse_relation = {});

// Graph bundle: a directory holding graph.json, one <relation>.csv edge file
// per relation and one <type>.features.csv per featured node type.

void save_graph(const HeteroGraph& g, const std::filesystem::path& dir);
HeteroGraph load_graph(const std::filesystem::path& dir);

}  // namespace hgnn
