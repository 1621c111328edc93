#include "dspool/hierarchy.hpp"

#include <algorithm>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "dspool/affinity.hpp"
#include "dspool/io.hpp"

namespace dspool {

namespace {

using ordered_json = nlohmann::ordered_json;

Matrix pool_by_partition(const Matrix& X, const Partition& partition,
                         PoolMode mode) {
  Matrix next(partition.size(), X.cols());
  for (Index k = 0; k < partition.size(); ++k) {
    const Cluster& members = partition.clusters[static_cast<std::size_t>(k)];
    next.row(k) = within_cluster_pool(X(members, Eigen::all), mode).values;
  }
  return next;
}

[[noreturn]] void malformed(const std::string& what) {
  throw ValidationError("malformed hierarchy: " + what);
}

}  // namespace

Index ClusteringHierarchy::final_node_count() const {
  return levels.empty() ? views_per_object : levels.back().partition.size();
}

void ClusteringHierarchy::validate_structure() const {
  if (views_per_object < 1) {
    throw ValidationError("hierarchy must cover at least one view");
  }
  Index n = views_per_object;
  for (std::size_t t = 0; t < levels.size(); ++t) {
    levels[t].partition.validate(n);
    const Index next = levels[t].partition.size();
    if (t + 1 < levels.size() && next >= n) {
      throw ValidationError("hierarchy level " + std::to_string(t) +
                            " merges nothing but is not the last level");
    }
    n = next;
  }
}

void ClusteringHierarchy::validate_termination(int max_depth) const {
  int budget = max_depth;
  if (!structure_name.empty()) {
    budget = PoolStructure::from_name(structure_name, max_depth)
                 .recurrence_budget();
  }
  if (static_cast<int>(levels.size()) > budget) {
    throw ValidationError("hierarchy has " + std::to_string(levels.size()) +
                          " levels but the structure allows " +
                          std::to_string(budget));
  }
  if (final_node_count() == 1) return;
  if (!levels.empty() && levels.back().partition.all_singletons()) return;
  if (levels.empty() && views_per_object == 1) return;
  if (static_cast<int>(levels.size()) == budget) return;
  throw ValidationError(
      "hierarchy stops early: last partition still merges views, more than "
      "one node remains, and the recurrence budget is not spent");
}

ClusteringHierarchy build_universal_hierarchy(const std::vector<Matrix>& objects,
                                              const PoolStructure& structure,
                                              const ReplicatorConfig& cfg) {
  if (objects.empty()) {
    throw ValidationError("cannot build a hierarchy from zero objects");
  }
  for (const Matrix& X : objects) {
    validate_features(X);
    if (X.rows() != objects.front().rows() ||
        X.cols() != objects.front().cols()) {
      throw ValidationError("objects must share one views-by-channels shape");
    }
  }

  ClusteringHierarchy h;
  h.views_per_object = objects.front().rows();
  h.structure_name = structure.name();
  h.final_mode = structure.final_mode();

  std::vector<Matrix> current = objects;
  const int budget = structure.recurrence_budget();
  for (int t = 0; t < budget && current.front().rows() > 1; ++t) {
    // Fresh affinities at every recurrence: the average is taken over the
    // pooled matrices of the previous level, not carried forward.
    std::vector<Matrix> affinities;
    affinities.reserve(current.size());
    for (const Matrix& X : current) affinities.push_back(build_affinity(X));
    const Partition partition = peel_partition(average_affinities(affinities), cfg);

    const PoolMode mode = structure.mode_at(t);
    h.levels.push_back({partition, mode});
    for (Matrix& X : current) X = pool_by_partition(X, partition, mode);
    if (partition.all_singletons()) break;  // recorded, then stop recurring
  }
  return h;
}

ForwardResult apply_hierarchy(const Matrix& X, const ClusteringHierarchy& h) {
  return forward(X, PoolStructure{}, &h);
}

std::string hierarchy_to_json(const ClusteringHierarchy& h) {
  ordered_json doc;
  doc["n"] = h.views_per_object;
  doc["structure"] = h.structure_name;
  doc["levels"] = ordered_json::array();
  for (const HierarchyLevel& level : h.levels) {
    ordered_json entry;
    entry["partition"] = ordered_json::array();
    for (const Cluster& cluster : level.partition.clusters) {
      entry["partition"].push_back(cluster);
    }
    entry["mode"] = to_string(level.mode);
    doc["levels"].push_back(std::move(entry));
  }
  doc["final_mode"] = to_string(h.final_mode);
  return doc.dump(2) + "\n";
}

ClusteringHierarchy hierarchy_from_json(const std::string& text, int max_depth) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    malformed(e.what());
  }
  if (!doc.is_object()) malformed("top level must be an object");
  for (const char* key : {"n", "structure", "levels", "final_mode"}) {
    if (!doc.contains(key)) malformed(std::string("missing field '") + key + "'");
  }
  if (!doc["n"].is_number_integer()) malformed("'n' must be an integer");
  if (!doc["structure"].is_string()) malformed("'structure' must be a string");
  if (!doc["levels"].is_array()) malformed("'levels' must be an array");
  if (!doc["final_mode"].is_string()) malformed("'final_mode' must be a string");

  ClusteringHierarchy h;
  h.views_per_object = doc["n"].get<Index>();
  h.structure_name = doc["structure"].get<std::string>();
  h.final_mode = pool_mode_from_string(doc["final_mode"].get<std::string>());
  for (const auto& entry : doc["levels"]) {
    if (!entry.is_object() || !entry.contains("partition") ||
        !entry.contains("mode") || !entry["partition"].is_array() ||
        !entry["mode"].is_string()) {
      malformed("each level needs a 'partition' array and a 'mode' string");
    }
    HierarchyLevel level;
    level.mode = pool_mode_from_string(entry["mode"].get<std::string>());
    for (const auto& cluster : entry["partition"]) {
      if (!cluster.is_array()) malformed("clusters must be arrays of indices");
      Cluster members;
      for (const auto& v : cluster) {
        if (!v.is_number_integer()) malformed("vertex indices must be integers");
        members.push_back(v.get<Index>());
      }
      std::sort(members.begin(), members.end());
      level.partition.clusters.push_back(std::move(members));
    }
    h.levels.push_back(std::move(level));
  }

  h.validate_structure();
  h.validate_termination(max_depth);
  return h;
}

void save_hierarchy(const ClusteringHierarchy& h, const std::string& path) {
  write_text_file(path, hierarchy_to_json(h));
}

ClusteringHierarchy load_hierarchy(const std::string& path, int max_depth) {
  return hierarchy_from_json(read_text_file(path), max_depth);
}

}  // namespace dspool
