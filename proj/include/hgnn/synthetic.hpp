#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hgnn/hgraph.hpp"

namespace hgnn {

struct SyntheticNodeType {
  std::string name;
  std::size_t count = 0;
  std::size_t feature_dim = 0;
};

struct SyntheticRelation {
  std::string name;
  std::string src_type;
  std::string dst_type;
  std::size_t edges = 0;
  /// When non-empty, a mirrored relation dst->src with this name is added.
  std::string reverse_name;
};

/// Planted-partition heterogeneous graph. Every node of every type is assigned
/// one of `communities` balanced communities. An edge picks its source
/// uniformly; with probability `boost` its destination is drawn from the
/// source's community, otherwise uniformly. Target-type labels are the
/// communities, each replaced by a uniform class with probability
/// `label_noise`. Features are a per-(type, community) centroid scaled by
/// `feature_signal` plus N(0, feature_noise^2) noise.
struct SyntheticSpec {
  std::vector<SyntheticNodeType> node_types;
  std::vector<SyntheticRelation> relations;
  std::string target_type;
  std::size_t communities = 4;
  double boost = 0.9;
  double label_noise = 0.0;
  double feature_signal = 1.0;
  double feature_noise = 1.0;
  std::uint64_t seed = 0;
};

/// Throws Error describing the first invalid field.
void validate(const SyntheticSpec& spec);

/// Pure function of `spec`; identical output for identical input.
HeteroGraph generate_synthetic(const SyntheticSpec& spec);

/// Two-type academic graph: paper (labelled target) and author, linked by
/// `writes` (author->paper) and its mirror `written_by`.
SyntheticSpec academic_spec(std::size_t papers, std::size_t authors, std::size_t edges, double boost,
                            std::uint64_t seed);

}  // namespace hgnn
