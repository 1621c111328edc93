#include "dspool/affinity.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include <doctest.h>

#include "dspool/types.hpp"
#include "test_util.hpp"

using dspool::Index;
using dspool::Matrix;
using dspool::ValidationError;

namespace {

// Independent oracle: inner products by explicit double loop.
Matrix naive_affinity(const Matrix& X) {
  const Index n = X.rows();
  Matrix A = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (i == j) continue;
      double dot = 0.0;
      for (Index c = 0; c < X.cols(); ++c) dot += X(i, c) * X(j, c);
      A(i, j) = dot;
    }
  }
  return A;
}

}  // namespace

TEST_CASE("similarity graph matches a double-loop inner-product oracle") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Matrix X = testutil::random_features(3 + seed % 7, 2 + seed % 5, seed);
    const Matrix A = dspool::build_affinity(X);
    const Matrix expected = naive_affinity(X);
    REQUIRE(A.rows() == X.rows());
    REQUIRE(A.cols() == X.rows());
    CHECK((A - expected).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("similarity graph is exactly symmetric with an exactly zero diagonal") {
  const Matrix X = testutil::random_features(9, 6, 42);
  const Matrix A = dspool::build_affinity(X);
  for (Index i = 0; i < A.rows(); ++i) {
    CHECK(A(i, i) == 0.0);
    for (Index j = 0; j < A.cols(); ++j) {
      CHECK(A(i, j) == A(j, i));  // bitwise: both triangles share one dot product
    }
  }
}

TEST_CASE("single view gives the 1x1 zero graph") {
  Matrix X(1, 3);
  X << 1.0, 2.0, 3.0;
  const Matrix A = dspool::build_affinity(X);
  REQUIRE(A.rows() == 1);
  CHECK(A(0, 0) == 0.0);
}

TEST_CASE("orthogonal views give the zero graph") {
  Matrix X = Matrix::Zero(3, 3);
  X(0, 0) = 2.0;
  X(1, 1) = 3.0;
  X(2, 2) = 4.0;
  CHECK(dspool::build_affinity(X).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("identical views give a constant off-diagonal equal to the squared norm") {
  Matrix X(3, 2);
  X << 1.0, 2.0, 1.0, 2.0, 1.0, 2.0;
  const Matrix A = dspool::build_affinity(X);
  for (Index i = 0; i < 3; ++i) {
    for (Index j = 0; j < 3; ++j) {
      CHECK(A(i, j) == (i == j ? 0.0 : 5.0));
    }
  }
}

TEST_CASE("feature validation rejects bad inputs") {
  CHECK_THROWS_AS(dspool::validate_features(Matrix()), ValidationError);
  Matrix neg = Matrix::Ones(2, 2);
  neg(1, 0) = -0.5;
  CHECK_THROWS_AS(dspool::validate_features(neg), ValidationError);
  Matrix nan = Matrix::Ones(2, 2);
  nan(0, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(dspool::validate_features(nan), ValidationError);
  Matrix inf = Matrix::Ones(2, 2);
  inf(0, 1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(dspool::validate_features(inf), ValidationError);
  CHECK_NOTHROW(dspool::validate_features(Matrix::Zero(1, 1)));
}

TEST_CASE("affinity validation enforces shape, symmetry, diagonal, and sign") {
  CHECK_NOTHROW(dspool::validate_affinity(testutil::random_affinity(5, 1)));
  CHECK_NOTHROW(dspool::validate_affinity(Matrix::Zero(1, 1)));

  CHECK_THROWS_AS(dspool::validate_affinity(Matrix::Zero(2, 3)), ValidationError);

  Matrix diag = testutil::uniform_affinity(3);
  diag(1, 1) = 0.5;
  CHECK_THROWS_AS(dspool::validate_affinity(diag), ValidationError);

  Matrix asym = testutil::uniform_affinity(3);
  asym(0, 1) = 0.25;
  CHECK_THROWS_AS(dspool::validate_affinity(asym), ValidationError);

  Matrix neg = testutil::uniform_affinity(3);
  neg(0, 1) = neg(1, 0) = -1.0;
  CHECK_THROWS_AS(dspool::validate_affinity(neg), ValidationError);
}

TEST_CASE("averaging matches the entrywise mean and validates its inputs") {
  std::vector<Matrix> mats;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    mats.push_back(testutil::random_affinity(6, 100 + seed));
  }
  const Matrix avg = dspool::average_affinities(mats);
  Matrix expected = Matrix::Zero(6, 6);
  for (const Matrix& m : mats) expected += m;
  expected /= 4.0;
  CHECK((avg - expected).cwiseAbs().maxCoeff() < 1e-15);

  CHECK_THROWS_AS(dspool::average_affinities({}), ValidationError);
  mats.push_back(testutil::random_affinity(5, 7));
  CHECK_THROWS_AS(dspool::average_affinities(mats), ValidationError);
}

TEST_CASE("averaging one matrix returns it unchanged") {
  const Matrix A = testutil::random_affinity(4, 9);
  CHECK((dspool::average_affinities({A}) - A).cwiseAbs().maxCoeff() == 0.0);
}
