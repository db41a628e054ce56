#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace froda {

/// Dense column-major matrix. Feature matrices store one sample per column.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller-supplied argument violated a documented precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Shapes of two or more operands are incompatible.
class DimensionMismatch : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// A requested rank or dimension is not attainable from the data.
class RankDeficient : public Error {
 public:
  RankDeficient(const std::string& what, std::ptrdiff_t attainable)
      : Error(what), attainable_(attainable) {}
  std::ptrdiff_t attainable() const noexcept { return attainable_; }

 private:
  std::ptrdiff_t attainable_;
};

/// Throws InvalidArgument unless every entry of `m` is finite.
void require_finite(const Matrix& m, std::string_view what);

/// Throws InvalidArgument unless `m` is a valid feature matrix
/// (at least one row and one column, every entry finite).
void require_features(const Matrix& m, std::string_view what);

}  // namespace froda
