#include "dspool/domset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <utility>
#include <unordered_map>

#include "dspool/affinity.hpp"

namespace dspool {

namespace {

void require_sorted_unique(const Cluster& S, Index n, const char* what) {
  if (S.empty()) throw ValidationError(std::string(what) + " must be nonempty");
  for (std::size_t k = 0; k < S.size(); ++k) {
    if (S[k] < 0 || S[k] >= n) {
      throw ValidationError(std::string(what) + " index " +
                            std::to_string(S[k]) + " out of range");
    }
    if (k > 0 && S[k] <= S[k - 1]) {
      throw ValidationError(std::string(what) +
                            " must be strictly ascending without duplicates");
    }
  }
}

std::string cluster_to_string(const Cluster& S) {
  std::ostringstream os;
  os << "{";
  for (std::size_t k = 0; k < S.size(); ++k) {
    if (k) os << ",";
    os << S[k];
  }
  os << "}";
  return os.str();
}

// Subset weights over a small local universe (vertex = bit position in the
// masks). Memoized on (mask, vertex); the recursion never leaves the
// universe it starts from, so local indexing is lossless.
class WeightOracle {
 public:
  // Keeps its own copy: callers hand in induced-subgraph temporaries, and
  // the universe is capped small anyway.
  explicit WeightOracle(Matrix A) : A_(std::move(A)) {}

  double phi(std::uint32_t mask, int i, int j) const {
    double avg = 0.0;
    for (int k = 0; k < A_.rows(); ++k) {
      if (mask & (1u << k)) avg += A_(i, k);
    }
    avg /= static_cast<double>(std::popcount(mask));
    return A_(i, j) - avg;
  }

  double weight(std::uint32_t mask, int i) {
    if (std::popcount(mask) == 1) return 1.0;
    const std::uint64_t key = (static_cast<std::uint64_t>(mask) << 5) |
                              static_cast<std::uint64_t>(i);
    auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;
    const std::uint32_t rest = mask & ~(1u << i);
    double w = 0.0;
    for (int j = 0; j < A_.rows(); ++j) {
      if (rest & (1u << j)) {
        w += phi(rest, j, i) * weight(rest, j);
      }
    }
    memo_.emplace(key, w);
    return w;
  }

  double total(std::uint32_t mask) {
    double sum = 0.0;
    for (int i = 0; i < A_.rows(); ++i) {
      if (mask & (1u << i)) sum += weight(mask, i);
    }
    return sum;
  }

 private:
  Matrix A_;
  std::unordered_map<std::uint64_t, double> memo_;
};

void check_size_cap(std::size_t size, int cap, const char* what) {
  if (static_cast<int>(size) > cap) {
    throw ValidationError(std::string(what) + " of size " +
                          std::to_string(size) + " exceeds the oracle cap " +
                          std::to_string(cap));
  }
}

}  // namespace

double relative_similarity(const Cluster& S, Index i, Index j, const Matrix& A) {
  validate_affinity(A);
  require_sorted_unique(S, A.rows(), "subset");
  if (!std::binary_search(S.begin(), S.end(), i)) {
    throw ValidationError("vertex i must belong to the subset");
  }
  if (j < 0 || j >= A.rows() || std::binary_search(S.begin(), S.end(), j)) {
    throw ValidationError("vertex j must lie outside the subset");
  }
  double avg = 0.0;
  for (Index k : S) avg += A(i, k);
  avg /= static_cast<double>(S.size());
  return A(i, j) - avg;
}

double subset_weight(const Cluster& S, Index i, const Matrix& A, int size_cap) {
  validate_affinity(A);
  require_sorted_unique(S, A.rows(), "subset");
  check_size_cap(S.size(), size_cap, "subset");
  const auto pos = std::lower_bound(S.begin(), S.end(), i);
  if (pos == S.end() || *pos != i) {
    throw ValidationError("vertex i must belong to the subset");
  }
  WeightOracle oracle(induced_subgraph(A, S));
  const std::uint32_t full = (1u << S.size()) - 1u;
  return oracle.weight(full, static_cast<int>(pos - S.begin()));
}

double total_weight(const Cluster& S, const Matrix& A, int size_cap) {
  validate_affinity(A);
  require_sorted_unique(S, A.rows(), "subset");
  check_size_cap(S.size(), size_cap, "subset");
  WeightOracle oracle(induced_subgraph(A, S));
  return oracle.total((1u << S.size()) - 1u);
}

DominantSetCheck check_dominant_set(const Cluster& S, const Matrix& A,
                                    double tol, int size_cap) {
  validate_affinity(A);
  require_sorted_unique(S, A.rows(), "candidate set");
  if (tol < 0.0) throw ValidationError("tolerance must be nonnegative");
  check_size_cap(S.size(), size_cap, "candidate set");

  const Index n = A.rows();
  const int m = static_cast<int>(S.size());

  // Internal conditions on the induced subgraph of S.
  {
    WeightOracle oracle(induced_subgraph(A, S));
    const std::uint32_t full = (1u << m) - 1u;
    // W(T) > tol for every nonempty T of S.
    for (std::uint32_t mask = full;; mask = (mask - 1) & full) {
      if (mask == 0) break;
      if (oracle.total(mask) <= tol) {
        Cluster T;
        for (int k = 0; k < m; ++k) {
          if (mask & (1u << k)) T.push_back(S[static_cast<std::size_t>(k)]);
        }
        return {false, "W(T) <= tol for T=" + cluster_to_string(T)};
      }
    }
    // w_S(i) > -tol for every member.
    for (int k = 0; k < m; ++k) {
      if (oracle.weight(full, k) <= -tol) {
        return {false, "w_S(i) <= -tol for i=" +
                           std::to_string(S[static_cast<std::size_t>(k)])};
      }
    }
  }

  // External condition: w_{S+j}(j) < tol for every j outside S. The
  // one-vertex extension is implied by the check, so it is exempt from the
  // size cap that guards the caller-supplied set.
  if (static_cast<Index>(S.size()) < n) {
    for (Index j = 0; j < n; ++j) {
      if (std::binary_search(S.begin(), S.end(), j)) continue;
      Cluster ext = S;
      ext.insert(std::lower_bound(ext.begin(), ext.end(), j), j);
      const auto pos = std::lower_bound(ext.begin(), ext.end(), j);
      WeightOracle oracle(induced_subgraph(A, ext));
      const std::uint32_t full = (1u << ext.size()) - 1u;
      if (oracle.weight(full, static_cast<int>(pos - ext.begin())) >= tol) {
        return {false, "w_{S+j}(j) >= tol for j=" + std::to_string(j)};
      }
    }
  }
  return {true, ""};
}

bool verify_dominant_set(const Cluster& S, const Matrix& A, double tol,
                         int size_cap) {
  return check_dominant_set(S, A, tol, size_cap).ok;
}

std::vector<Cluster> brute_force_dominant_sets(const Matrix& A, double tol) {
  validate_affinity(A);
  const Index n = A.rows();
  if (n > kBruteForceCap) {
    throw ValidationError("brute-force enumeration is limited to n <= " +
                          std::to_string(kBruteForceCap));
  }
  std::vector<Cluster> result;
  const std::uint32_t end = 1u << n;
  for (std::uint32_t mask = 1; mask < end; ++mask) {
    Cluster S;
    for (Index v = 0; v < n; ++v) {
      if (mask & (1u << v)) S.push_back(v);
    }
    if (check_dominant_set(S, A, tol, static_cast<int>(n) + 1).ok) {
      result.push_back(std::move(S));
    }
  }
  return result;
}

std::optional<Vector> replicator_step(const Vector& x, const Matrix& A) {
  const Vector payoff = A * x;
  const double mean_payoff = x.dot(payoff);
  if (mean_payoff == 0.0) return std::nullopt;
  Vector next = x.cwiseProduct(payoff) / mean_payoff;
  next /= next.sum();  // shed rounding dust, keep the simplex tight
  return next;
}

Matrix induced_subgraph(const Matrix& A, const Cluster& vertices) {
  return A(vertices, vertices);
}

DominantSetResult extract_dominant_set(const Matrix& A,
                                       const ReplicatorConfig& cfg) {
  validate_affinity(A);
  const Index n = A.rows();

  DominantSetResult result;
  Vector x = Vector::Constant(n, 1.0 / static_cast<double>(n));

  for (int it = 0; it < cfg.max_iter; ++it) {
    auto next = replicator_step(x, A);
    if (!next) {
      // Degenerate dynamics: no payoff anywhere, no grouping evidence.
      result.support = {0};
      result.characteristic = Vector::Zero(n);
      result.characteristic(0) = 1.0;
      result.cohesiveness = 0.0;
      result.iterations = it;
      return result;
    }
    if (!next->allFinite()) {
      throw NumericalError("replicator dynamics produced a non-finite iterate");
    }
    const double change = (*next - x).lpNorm<1>();
    x = std::move(*next);
    result.iterations = it + 1;
    if (change < cfg.tol) break;
  }

  result.characteristic = x;
  result.cohesiveness = x.dot(A * x);
  for (Index i = 0; i < n; ++i) {
    if (x(i) > cfg.support_threshold) result.support.push_back(i);
  }
  if (result.support.empty()) {
    Index best = 0;
    x.maxCoeff(&best);
    result.support.push_back(best);
  }
  return result;
}

Partition peel_partition(const Matrix& A, const ReplicatorConfig& cfg) {
  validate_affinity(A);
  Cluster remaining(static_cast<std::size_t>(A.rows()));
  std::iota(remaining.begin(), remaining.end(), Index{0});

  Partition partition;
  while (!remaining.empty()) {
    const DominantSetResult res =
        extract_dominant_set(induced_subgraph(A, remaining), cfg);
    Cluster cluster;
    cluster.reserve(res.support.size());
    for (Index local : res.support) {
      cluster.push_back(remaining[static_cast<std::size_t>(local)]);
    }
    Cluster rest;
    rest.reserve(remaining.size() - cluster.size());
    std::set_difference(remaining.begin(), remaining.end(), cluster.begin(),
                        cluster.end(), std::back_inserter(rest));
    partition.clusters.push_back(std::move(cluster));
    remaining = std::move(rest);
  }
  return partition;
}

}  // namespace dspool
