#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <string>

namespace sr3 {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Raised when an iterative numerical kernel fails to meet its contract
/// (non-convergent Newton iteration, singular factorization, ...).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace sr3
