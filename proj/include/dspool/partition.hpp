#pragma once

#include <vector>

#include "dspool/types.hpp"

namespace dspool {

/// Vertex subset, kept sorted ascending.
using Cluster = std::vector<Index>;

/// Ordered list of disjoint clusters covering {0..n-1}.
struct Partition {
  std::vector<Cluster> clusters;

  Index node_count() const;
  bool all_singletons() const;
  bool empty() const { return clusters.empty(); }
  Index size() const { return static_cast<Index>(clusters.size()); }

  /// Throws ValidationError unless clusters are nonempty, pairwise
  /// disjoint, and cover {0..n-1} exactly.
  void validate(Index n) const;
};

}  // namespace dspool
