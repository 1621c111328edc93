#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dspool/partition.hpp"
#include "dspool/types.hpp"

namespace dspool {

/// Subset-weight recursion is exponential; calls on larger sets are refused.
inline constexpr int kWeightSizeCap = 12;

/// Largest graph brute_force_dominant_sets will enumerate.
inline constexpr int kBruteForceCap = 10;

/// Similarity of outside vertex j to i in S, relative to the average
/// similarity between i and S.
double relative_similarity(const Cluster& S, Index i, Index j, const Matrix& A);

/// Recursive vertex weight w_S(i); 1 for singleton S. Memoized internally.
double subset_weight(const Cluster& S, Index i, const Matrix& A,
                     int size_cap = kWeightSizeCap);

/// Total weight W(S) = sum of w_S(i) over members.
double total_weight(const Cluster& S, const Matrix& A,
                    int size_cap = kWeightSizeCap);

struct DominantSetCheck {
  bool ok = false;
  std::string violation;  // empty when ok
};

/// Definition check with a signed tolerance band so exact-zero boundary
/// weights resolve deterministically:
///   internal coherence  W(T) >  tol   for every nonempty T of S,
///   member weights      w_S(i) > -tol for every i in S,
///   external weights    w_{S+i}(i) < tol for every i outside S.
DominantSetCheck check_dominant_set(const Cluster& S, const Matrix& A,
                                    double tol, int size_cap = kWeightSizeCap);

bool verify_dominant_set(const Cluster& S, const Matrix& A, double tol,
                         int size_cap = kWeightSizeCap);

/// All subsets passing the dominant-set check, in mask order. n <= 10.
std::vector<Cluster> brute_force_dominant_sets(const Matrix& A,
                                               double tol = 1e-6);

struct ReplicatorConfig {
  double tol = 1e-8;               // L1 change between iterates
  int max_iter = 10000;
  double support_threshold = 1e-5; // component cutoff after convergence
};

/// One multiplicative update x_i <- x_i (Ax)_i / (x.Ax).
/// Returns nullopt when the payoff x.Ax is zero (degenerate subgraph).
std::optional<Vector> replicator_step(const Vector& x, const Matrix& A);

struct DominantSetResult {
  Cluster support;
  Vector characteristic;  // simplex vector over the whole given graph
  double cohesiveness = 0.0;
  int iterations = 0;
};

/// Replicator dynamics from the barycenter. A degenerate graph (zero
/// payoff) yields the lowest-index vertex as a singleton.
DominantSetResult extract_dominant_set(const Matrix& A,
                                       const ReplicatorConfig& cfg = {});

/// Peel-off partition: extract, remove the support, repeat on the induced
/// subgraph until no vertices remain. Clusters in extraction order.
Partition peel_partition(const Matrix& A, const ReplicatorConfig& cfg = {});

/// A restricted to the given rows/columns.
Matrix induced_subgraph(const Matrix& A, const Cluster& vertices);

}  // namespace dspool
