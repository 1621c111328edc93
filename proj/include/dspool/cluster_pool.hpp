#pragma once

#include <string>
#include <vector>

#include "dspool/domset.hpp"
#include "dspool/partition.hpp"
#include "dspool/types.hpp"

namespace dspool {

struct ClusteringHierarchy;

enum class PoolVariant { FMax, DsAvgFMax, DsMaxFAvg, DsAltFMax };

/// Pooling structure: which within-cluster mode each recurrence uses, how
/// many recurrences are allowed, and the full-stride mode at the end.
///   f-max          no clustering, full-stride max only
///   ds-avg-f-max   one clustering recurrence, average within clusters
///   ds-max-f-avg   one clustering recurrence, max within clusters
///   ds-alt-f-max   recur until stable, alternating max/average (max first)
struct PoolStructure {
  PoolVariant variant = PoolVariant::DsAltFMax;
  int max_recurrence_depth = 4;

  int recurrence_budget() const;
  PoolMode mode_at(int level) const;
  PoolMode final_mode() const;
  std::string name() const;
  static PoolStructure from_name(const std::string& name, int depth = 4);
};

/// Row-selection matrix for one cluster: row i of the conceptual one-hot
/// matrix selects column members[i].
struct ClusterAssignment {
  Cluster members;
  Index columns = 0;

  void validate() const;
  Matrix to_matrix() const;  // |members| x columns one-hot matrix
};

/// m_k = C X: the rows of X belonging to the cluster, in member order.
Matrix gather_cluster(const ClusterAssignment& C, const Matrix& X);

struct PooledRow {
  RowVector values;
  IndexList argmax;  // per channel, local row index; empty for Average
};

/// Channel-wise max (recording the smallest maximizing row per channel) or
/// channel-wise mean over the block rows.
PooledRow within_cluster_pool(const Matrix& block, PoolMode mode);

struct LevelTrace {
  Index node_count = 0;  // rows entering this recurrence
  Partition partition;
  PoolMode mode = PoolMode::Max;
  // Per cluster: for Max, the selected level-local row per channel;
  // empty list for Average.
  std::vector<IndexList> argmax;
};

struct RecurrenceTrace {
  Index input_rows = 0;
  Index channels = 0;
  std::vector<LevelTrace> levels;
  PoolMode final_mode = PoolMode::Max;
  Index final_rows = 0;
  IndexList final_argmax;  // per channel; empty for Average
};

struct ForwardResult {
  RowVector pooled;
  RecurrenceTrace trace;
};

/// Recurrent clustering and pooling. With a fixed hierarchy the recorded
/// partitions and modes are replayed instead of clustering per object.
ForwardResult forward(const Matrix& X0, const PoolStructure& structure,
                      const ClusteringHierarchy* fixed_hierarchy = nullptr,
                      const ReplicatorConfig& cfg = {});

/// Gradient w.r.t. the layer input: recurrences reversed, max routed to the
/// recorded argmax rows, average split evenly across cluster members, rows
/// scattered back through the transposed cluster assignment.
Matrix backward(const RowVector& grad_pooled, const RecurrenceTrace& trace);

struct GradientCheckResult {
  double max_relative_error = 0.0;
  IndexList excluded_channels;  // tie-ambiguous max channels, skipped
  Index checked_entries = 0;
};

/// Central-difference check of backward() against forward() with clustering
/// frozen to the hierarchy. Channels whose max pooling has a top-2 gap
/// within the tie margin are excluded and reported.
GradientCheckResult gradient_check(const Matrix& X0,
                                   const ClusteringHierarchy& hierarchy,
                                   double eps = 1e-5,
                                   double tie_margin = -1.0);

}  // namespace dspool
