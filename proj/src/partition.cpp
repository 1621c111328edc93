#include "dspool/partition.hpp"

#include <string>

namespace dspool {

Index Partition::node_count() const {
  Index total = 0;
  for (const Cluster& c : clusters) total += static_cast<Index>(c.size());
  return total;
}

bool Partition::all_singletons() const {
  for (const Cluster& c : clusters) {
    if (c.size() != 1) return false;
  }
  return true;
}

void Partition::validate(Index n) const {
  if (node_count() != n) {
    throw ValidationError("partition covers " + std::to_string(node_count()) +
                          " nodes, expected " + std::to_string(n));
  }
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  for (const Cluster& c : clusters) {
    if (c.empty()) throw ValidationError("partition contains an empty cluster");
    for (Index v : c) {
      if (v < 0 || v >= n) {
        throw ValidationError("partition index " + std::to_string(v) +
                              " out of range for n=" + std::to_string(n));
      }
      if (seen[static_cast<std::size_t>(v)]) {
        throw ValidationError("partition clusters overlap at node " +
                              std::to_string(v));
      }
      seen[static_cast<std::size_t>(v)] = 1;
    }
  }
}

}  // namespace dspool
