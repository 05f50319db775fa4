#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace cbo {

/// A point in R^d.
using Vector = Eigen::VectorXd;

/// N x d array, one particle (or sample) per row.
using PointMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using PointRef = Eigen::Ref<const Vector>;

/// Raised when inputs violate a documented precondition (bad dimension,
/// non-finite value, invalid parameter).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a computation cannot produce a valid result (divergence,
/// solver non-convergence, broken internal identity).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InvalidArgument(message);
}

}  // namespace cbo
