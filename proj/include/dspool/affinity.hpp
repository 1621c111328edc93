#pragma once

#include <vector>

#include "dspool/types.hpp"

namespace dspool {

/// Throws ValidationError unless X is a nonempty matrix of finite,
/// nonnegative entries (one view per row).
void validate_features(const Matrix& X);

/// Throws ValidationError unless A is square, symmetric, zero on the main
/// diagonal, and all entries are finite and nonnegative.
void validate_affinity(const Matrix& A);

/// View similarity graph: a_ij = <row_i, row_j> for i != j, a_ii = 0.
Matrix build_affinity(const Matrix& X);

/// Entrywise mean of same-sized affinity matrices.
Matrix average_affinities(const std::vector<Matrix>& affinities);

}  // namespace dspool
