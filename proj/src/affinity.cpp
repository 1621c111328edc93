#include "dspool/affinity.hpp"

#include <cmath>
#include <string>

namespace dspool {

std::string to_string(PoolMode mode) {
  return mode == PoolMode::Max ? "max" : "avg";
}

PoolMode pool_mode_from_string(const std::string& name) {
  if (name == "max") return PoolMode::Max;
  if (name == "avg" || name == "average") return PoolMode::Average;
  throw ValidationError("unknown pool mode '" + name + "'");
}

void validate_features(const Matrix& X) {
  if (X.rows() < 1 || X.cols() < 1) {
    throw ValidationError("feature matrix must have at least one row and column");
  }
  for (Index i = 0; i < X.rows(); ++i) {
    for (Index j = 0; j < X.cols(); ++j) {
      const double v = X(i, j);
      if (!std::isfinite(v)) {
        throw ValidationError("feature entry (" + std::to_string(i) + "," +
                              std::to_string(j) + ") is not finite");
      }
      if (v < 0.0) {
        throw ValidationError("feature entry (" + std::to_string(i) + "," +
                              std::to_string(j) + ") is negative");
      }
    }
  }
}

void validate_affinity(const Matrix& A) {
  if (A.rows() < 1 || A.rows() != A.cols()) {
    throw ValidationError("affinity matrix must be square and nonempty");
  }
  for (Index i = 0; i < A.rows(); ++i) {
    if (A(i, i) != 0.0) {
      throw ValidationError("affinity diagonal entry " + std::to_string(i) +
                            " is nonzero");
    }
    for (Index j = 0; j < A.cols(); ++j) {
      const double v = A(i, j);
      if (!std::isfinite(v) || v < 0.0) {
        throw ValidationError("affinity entry (" + std::to_string(i) + "," +
                              std::to_string(j) + ") is negative or not finite");
      }
      if (A(i, j) != A(j, i)) {
        throw ValidationError("affinity matrix is not symmetric at (" +
                              std::to_string(i) + "," + std::to_string(j) + ")");
      }
    }
  }
}

Matrix build_affinity(const Matrix& X) {
  validate_features(X);
  const Index n = X.rows();
  Matrix A = Matrix::Zero(n, n);
  // One dot product per pair, assigned to both triangles: symmetry and the
  // zero diagonal hold exactly, not up to rounding.
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      const double w = X.row(i).dot(X.row(j));
      A(i, j) = w;
      A(j, i) = w;
    }
  }
  return A;
}

Matrix average_affinities(const std::vector<Matrix>& affinities) {
  if (affinities.empty()) {
    throw ValidationError("cannot average an empty list of affinity matrices");
  }
  const Index n = affinities.front().rows();
  for (const Matrix& A : affinities) {
    validate_affinity(A);
    if (A.rows() != n) {
      throw ValidationError("affinity matrices must share one dimension");
    }
  }
  Matrix sum = Matrix::Zero(n, n);
  for (const Matrix& A : affinities) sum += A;
  return sum / static_cast<double>(affinities.size());
}

}  // namespace dspool
