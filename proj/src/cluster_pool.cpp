#include "dspool/cluster_pool.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dspool/affinity.hpp"
#include "dspool/hierarchy.hpp"

namespace dspool {

namespace {

void require_finite_input(const Matrix& X) {
  if (X.rows() < 1 || X.cols() < 1) {
    throw ValidationError("layer input must have at least one row and column");
  }
  if (!X.allFinite()) {
    throw ValidationError("layer input contains non-finite values");
  }
}

// Pool every cluster of one recurrence level. Appends the per-cluster argmax
// rows (as level-local row indices) for Max, leaves them empty for Average.
Matrix pool_level(const Matrix& X, const Partition& partition, PoolMode mode,
                  std::vector<IndexList>* argmax_out) {
  Matrix next(static_cast<Index>(partition.clusters.size()), X.cols());
  for (std::size_t k = 0; k < partition.clusters.size(); ++k) {
    const Cluster& members = partition.clusters[k];
    PooledRow row = within_cluster_pool(X(members, Eigen::all), mode);
    next.row(static_cast<Index>(k)) = row.values;
    IndexList global;
    if (mode == PoolMode::Max) {
      global.reserve(row.argmax.size());
      for (Index local : row.argmax) {
        global.push_back(members[static_cast<std::size_t>(local)]);
      }
    }
    argmax_out->push_back(std::move(global));
  }
  return next;
}

}  // namespace

int PoolStructure::recurrence_budget() const {
  switch (variant) {
    case PoolVariant::FMax:
      return 0;
    case PoolVariant::DsAvgFMax:
    case PoolVariant::DsMaxFAvg:
      return 1;
    case PoolVariant::DsAltFMax:
      return max_recurrence_depth;
  }
  throw ValidationError("unknown pooling variant");
}

PoolMode PoolStructure::mode_at(int level) const {
  if (level < 0 || level >= recurrence_budget()) {
    throw ValidationError("recurrence level " + std::to_string(level) +
                          " outside the structure's budget");
  }
  switch (variant) {
    case PoolVariant::FMax:
      break;  // unreachable: budget is zero
    case PoolVariant::DsAvgFMax:
      return PoolMode::Average;
    case PoolVariant::DsMaxFAvg:
      return PoolMode::Max;
    case PoolVariant::DsAltFMax:
      return level % 2 == 0 ? PoolMode::Max : PoolMode::Average;
  }
  throw ValidationError("unknown pooling variant");
}

PoolMode PoolStructure::final_mode() const {
  return variant == PoolVariant::DsMaxFAvg ? PoolMode::Average : PoolMode::Max;
}

std::string PoolStructure::name() const {
  switch (variant) {
    case PoolVariant::FMax:
      return "f-max";
    case PoolVariant::DsAvgFMax:
      return "ds-avg-f-max";
    case PoolVariant::DsMaxFAvg:
      return "ds-max-f-avg";
    case PoolVariant::DsAltFMax:
      return "ds-alt-f-max";
  }
  throw ValidationError("unknown pooling variant");
}

PoolStructure PoolStructure::from_name(const std::string& name, int depth) {
  if (depth < 0) throw ValidationError("recurrence depth must be nonnegative");
  PoolStructure s;
  s.max_recurrence_depth = depth;
  if (name == "f-max") {
    s.variant = PoolVariant::FMax;
  } else if (name == "ds-avg-f-max") {
    s.variant = PoolVariant::DsAvgFMax;
  } else if (name == "ds-max-f-avg") {
    s.variant = PoolVariant::DsMaxFAvg;
  } else if (name == "ds-alt-f-max") {
    s.variant = PoolVariant::DsAltFMax;
  } else {
    throw ValidationError("unknown pooling structure '" + name +
                          "' (expected f-max, ds-avg-f-max, ds-max-f-avg, "
                          "or ds-alt-f-max)");
  }
  return s;
}

void ClusterAssignment::validate() const {
  if (columns < 1) {
    throw ValidationError("cluster assignment needs at least one column");
  }
  if (members.empty()) {
    throw ValidationError("cluster assignment must select at least one row");
  }
  for (std::size_t k = 0; k < members.size(); ++k) {
    if (members[k] < 0 || members[k] >= columns) {
      throw ValidationError("cluster member " + std::to_string(members[k]) +
                            " out of range");
    }
    if (k > 0 && members[k] <= members[k - 1]) {
      throw ValidationError(
          "cluster members must be strictly ascending without duplicates");
    }
  }
}

Matrix ClusterAssignment::to_matrix() const {
  validate();
  Matrix C = Matrix::Zero(static_cast<Index>(members.size()), columns);
  for (std::size_t k = 0; k < members.size(); ++k) {
    C(static_cast<Index>(k), members[k]) = 1.0;
  }
  return C;
}

Matrix gather_cluster(const ClusterAssignment& C, const Matrix& X) {
  C.validate();
  if (X.rows() != C.columns) {
    throw ValidationError("cluster assignment built for " +
                          std::to_string(C.columns) + " rows, got " +
                          std::to_string(X.rows()));
  }
  return X(C.members, Eigen::all);
}

PooledRow within_cluster_pool(const Matrix& block, PoolMode mode) {
  if (block.rows() < 1 || block.cols() < 1) {
    throw ValidationError("pooling block must have at least one row and column");
  }
  PooledRow out;
  if (mode == PoolMode::Average) {
    out.values = block.colwise().mean();
    return out;
  }
  out.values.resize(block.cols());
  out.argmax.resize(static_cast<std::size_t>(block.cols()));
  for (Index c = 0; c < block.cols(); ++c) {
    Index best = 0;
    double value = block(0, c);
    for (Index r = 1; r < block.rows(); ++r) {
      if (block(r, c) > value) {  // strict: ties keep the smallest row
        value = block(r, c);
        best = r;
      }
    }
    out.values(c) = value;
    out.argmax[static_cast<std::size_t>(c)] = best;
  }
  return out;
}

ForwardResult forward(const Matrix& X0, const PoolStructure& structure,
                      const ClusteringHierarchy* fixed_hierarchy,
                      const ReplicatorConfig& cfg) {
  ForwardResult result;
  result.trace.input_rows = X0.rows();
  result.trace.channels = X0.cols();

  Matrix X = X0;
  if (fixed_hierarchy != nullptr) {
    // Replay the shared scheme: partitions and modes come from the
    // hierarchy, only the pooled values (and max routing) depend on X.
    require_finite_input(X);
    const ClusteringHierarchy& h = *fixed_hierarchy;
    if (h.views_per_object != X.rows()) {
      throw ValidationError("hierarchy expects " +
                            std::to_string(h.views_per_object) +
                            " rows, got " + std::to_string(X.rows()));
    }
    for (const HierarchyLevel& level : h.levels) {
      level.partition.validate(X.rows());
      LevelTrace trace;
      trace.node_count = X.rows();
      trace.partition = level.partition;
      trace.mode = level.mode;
      X = pool_level(X, level.partition, level.mode, &trace.argmax);
      result.trace.levels.push_back(std::move(trace));
    }
    result.trace.final_mode = h.final_mode;
  } else {
    // Cluster this object on its own affinities, recurring until the
    // partition stops splitting anything or the budget is spent.
    validate_features(X);
    const int budget = structure.recurrence_budget();
    for (int t = 0; t < budget && X.rows() > 1; ++t) {
      const Partition partition = peel_partition(build_affinity(X), cfg);
      LevelTrace trace;
      trace.node_count = X.rows();
      trace.partition = partition;
      trace.mode = structure.mode_at(t);
      const bool stable = partition.all_singletons();
      X = pool_level(X, partition, trace.mode, &trace.argmax);
      result.trace.levels.push_back(std::move(trace));
      if (stable) break;  // all-singleton level recorded, nothing left to merge
    }
    result.trace.final_mode = structure.final_mode();
  }

  result.trace.final_rows = X.rows();
  PooledRow final_row = within_cluster_pool(X, result.trace.final_mode);
  result.pooled = std::move(final_row.values);
  result.trace.final_argmax = std::move(final_row.argmax);
  return result;
}

Matrix backward(const RowVector& grad_pooled, const RecurrenceTrace& trace) {
  if (trace.input_rows < 1 || trace.channels < 1) {
    throw ValidationError("trace does not describe a forward pass");
  }
  if (grad_pooled.size() != trace.channels) {
    throw ValidationError("gradient has " + std::to_string(grad_pooled.size()) +
                          " channels, trace has " +
                          std::to_string(trace.channels));
  }
  const Index d = trace.channels;

  // Undo the full-stride pool: route each channel to its recorded max row,
  // or split it evenly across all remaining rows.
  Matrix G = Matrix::Zero(trace.final_rows, d);
  if (trace.final_mode == PoolMode::Max) {
    if (static_cast<Index>(trace.final_argmax.size()) != d) {
      throw ValidationError("trace is missing the final max routing");
    }
    for (Index c = 0; c < d; ++c) {
      G(trace.final_argmax[static_cast<std::size_t>(c)], c) += grad_pooled(c);
    }
  } else {
    const double scale = 1.0 / static_cast<double>(trace.final_rows);
    for (Index r = 0; r < trace.final_rows; ++r) {
      G.row(r) = grad_pooled * scale;
    }
  }

  // Undo the recurrences in reverse: row k of the incoming gradient belongs
  // to cluster k of the level, and is routed to that cluster's members.
  for (auto it = trace.levels.rbegin(); it != trace.levels.rend(); ++it) {
    const LevelTrace& level = *it;
    if (G.rows() != static_cast<Index>(level.partition.clusters.size())) {
      throw ValidationError("trace levels do not chain: expected " +
                            std::to_string(level.partition.clusters.size()) +
                            " rows, have " + std::to_string(G.rows()));
    }
    Matrix prev = Matrix::Zero(level.node_count, d);
    for (std::size_t k = 0; k < level.partition.clusters.size(); ++k) {
      const Cluster& members = level.partition.clusters[k];
      const Index row = static_cast<Index>(k);
      if (level.mode == PoolMode::Max) {
        if (k >= level.argmax.size() ||
            static_cast<Index>(level.argmax[k].size()) != d) {
          throw ValidationError("trace is missing a level max routing");
        }
        for (Index c = 0; c < d; ++c) {
          prev(level.argmax[k][static_cast<std::size_t>(c)], c) += G(row, c);
        }
      } else {
        const double scale = 1.0 / static_cast<double>(members.size());
        for (Index member : members) {
          prev.row(member) += G.row(row) * scale;
        }
      }
    }
    G = std::move(prev);
  }

  if (G.rows() != trace.input_rows) {
    throw ValidationError("trace levels do not chain back to the input");
  }
  return G;
}

GradientCheckResult gradient_check(const Matrix& X0,
                                   const ClusteringHierarchy& hierarchy,
                                   double eps, double tie_margin) {
  require_finite_input(X0);
  if (eps <= 0.0) throw ValidationError("step size must be positive");
  if (tie_margin < 0.0) tie_margin = 2.0 * eps;

  const Index n = X0.rows();
  const Index d = X0.cols();

  // Channels where some max pool has a top-2 gap within the margin can flip
  // their routing under perturbation; finite differences straddle the kink,
  // so those channels are excluded. Pooling never mixes channels, which
  // makes per-channel exclusion airtight.
  std::vector<bool> excluded(static_cast<std::size_t>(d), false);
  const auto flag_close_channels = [&](const Matrix& block) {
    if (block.rows() < 2) return;
    for (Index c = 0; c < d; ++c) {
      double top = -std::numeric_limits<double>::infinity();
      double second = top;
      for (Index r = 0; r < block.rows(); ++r) {
        const double v = block(r, c);
        if (v > top) {
          second = top;
          top = v;
        } else if (v > second) {
          second = v;
        }
      }
      if (top - second <= tie_margin) excluded[static_cast<std::size_t>(c)] = true;
    }
  };
  {
    Matrix X = X0;
    for (const HierarchyLevel& level : hierarchy.levels) {
      level.partition.validate(X.rows());
      Matrix next(static_cast<Index>(level.partition.clusters.size()), d);
      std::vector<IndexList> argmax;
      for (std::size_t k = 0; k < level.partition.clusters.size(); ++k) {
        const Matrix block = X(level.partition.clusters[k], Eigen::all);
        if (level.mode == PoolMode::Max) flag_close_channels(block);
        next.row(static_cast<Index>(k)) =
            within_cluster_pool(block, level.mode).values;
      }
      X = std::move(next);
    }
    if (hierarchy.final_mode == PoolMode::Max) flag_close_channels(X);
  }

  // Quadratic probe loss: L = sum of squared pooled values / 2, so the
  // pooled vector itself is the upstream gradient, and the composition is
  // piecewise quadratic — central differences are exact away from ties.
  const PoolStructure unused;
  const auto loss = [&](const Matrix& X) {
    const RowVector pooled = forward(X, unused, &hierarchy).pooled;
    return 0.5 * pooled.squaredNorm();
  };

  const ForwardResult base = forward(X0, unused, &hierarchy);
  const Matrix analytic = backward(base.pooled, base.trace);

  GradientCheckResult result;
  for (Index c = 0; c < d; ++c) {
    if (excluded[static_cast<std::size_t>(c)]) {
      result.excluded_channels.push_back(c);
      continue;
    }
    for (Index i = 0; i < n; ++i) {
      Matrix X = X0;
      X(i, c) = X0(i, c) + eps;
      const double plus = loss(X);
      X(i, c) = X0(i, c) - eps;
      const double minus = loss(X);
      const double numeric = (plus - minus) / (2.0 * eps);
      const double a = analytic(i, c);
      const double rel =
          std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      result.max_relative_error = std::max(result.max_relative_error, rel);
      ++result.checked_entries;
    }
  }
  return result;
}

}  // namespace dspool
