#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace dcovica {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Index = Eigen::Index;

// Thrown when a column (or the whole sample) has no usable scale,
// e.g. a constant column passed to a standardizer or bandwidth rule.
class degenerate_data_error : public std::runtime_error {
 public:
  explicit degenerate_data_error(const std::string& what) : std::runtime_error(what) {}
};

// Thrown by whitening when the sample covariance is numerically singular.
class singular_covariance_error : public std::runtime_error {
 public:
  singular_covariance_error(const std::string& what, Index eigen_index)
      : std::runtime_error(what), eigenvalue_index(eigen_index) {}
  Index eigenvalue_index;
};

class invalid_argument_error : public std::invalid_argument {
 public:
  explicit invalid_argument_error(const std::string& what) : std::invalid_argument(what) {}
};

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw invalid_argument_error(msg);
}

}  // namespace dcovica
