#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace mtn {

using Scalar = double;
using Index = Eigen::Index;

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using IntVector = Eigen::VectorXi;
using Box = Eigen::AlignedBox<Scalar, Eigen::Dynamic>;

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Bad user input: malformed configs, unknown ids, infeasible parameters.
struct ConfigError : Error {
  using Error::Error;
};

/// Geometric preconditions violated (degenerate sampling, out-of-domain points).
struct GeometryError : Error {
  using Error::Error;
};

/// Numerical failure: non-finite values, solver breakdown.
struct NumericalError : Error {
  using Error::Error;
};

}  // namespace mtn
