#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>

namespace ofbs {

/// Largest vector dimension supported by the dense small-matrix paths.
inline constexpr int kMaxDim = 8;

/// Row-major d x d matrix with inline storage (no heap allocation for d <= kMaxDim).
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor, kMaxDim, kMaxDim>;
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;

/// A space-time point (t, s) of the sheet.
struct Point {
  double t = 0.0;
  double s = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

/// Argument outside the mathematical domain of an operation (t < 0, spectrum gate, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Caller violated a documented precondition (index range, dimension mismatch, non-finite input).
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical procedure failed to reach its target accuracy.
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& what, double estimate = 0.0, double error_bound = 0.0)
      : std::runtime_error(what), estimate_(estimate), error_bound_(error_bound) {}

  double estimate() const noexcept { return estimate_; }
  double error_bound() const noexcept { return error_bound_; }

 private:
  double estimate_;
  double error_bound_;
};

/// Statistical test cannot be formed (e.g. a projection with zero variance).
class DegenerateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input outside the cases an algorithm is implemented for.
class UnsupportedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent configuration / file content.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ofbs
