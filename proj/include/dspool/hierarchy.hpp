#pragma once

#include <string>
#include <vector>

#include "dspool/cluster_pool.hpp"
#include "dspool/partition.hpp"
#include "dspool/types.hpp"

namespace dspool {

struct HierarchyLevel {
  Partition partition;
  PoolMode mode = PoolMode::Max;
};

/// Clustering scheme shared by all objects: one partition per recurrence,
/// chained so level t partitions exactly the clusters produced by level
/// t-1, plus the full-stride mode applied at the end.
struct ClusteringHierarchy {
  Index views_per_object = 0;
  std::string structure_name;
  std::vector<HierarchyLevel> levels;
  PoolMode final_mode = PoolMode::Max;

  /// Node count after the last recorded level.
  Index final_node_count() const;

  /// Chained node counts and per-level partition invariants.
  void validate_structure() const;

  /// Termination evidence: last partition all singletons, one node left,
  /// or the structure's recurrence budget (with the given depth) is spent.
  void validate_termination(int max_depth = 4) const;
};

/// Shared scheme over a training set: at each recurrence the per-object
/// affinities are averaged, the average is partitioned, and every object is
/// pooled with that shared partition.
ClusteringHierarchy build_universal_hierarchy(const std::vector<Matrix>& objects,
                                              const PoolStructure& structure,
                                              const ReplicatorConfig& cfg = {});

/// forward() with clustering frozen to the hierarchy.
ForwardResult apply_hierarchy(const Matrix& X, const ClusteringHierarchy& h);

std::string hierarchy_to_json(const ClusteringHierarchy& h);
ClusteringHierarchy hierarchy_from_json(const std::string& text, int max_depth = 4);

void save_hierarchy(const ClusteringHierarchy& h, const std::string& path);
ClusteringHierarchy load_hierarchy(const std::string& path, int max_depth = 4);

}  // namespace dspool
