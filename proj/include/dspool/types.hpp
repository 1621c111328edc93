#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

namespace dspool {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Index = Eigen::Index;
using IndexList = std::vector<Index>;

/// Rejected input: shape, range, or format constraint violated.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical failure: NaN/Inf encountered or iteration diverged.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class PoolMode { Max, Average };

std::string to_string(PoolMode mode);
PoolMode pool_mode_from_string(const std::string& name);

}  // namespace dspool
