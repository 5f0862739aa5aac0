#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace nlsctl {

/// Input outside the mathematical domain of an operation (k >= 1, mu < 0, a >= b, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Fields or operators living on different grids.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An iterative method stopped without meeting its tolerance.
class IterationError : public std::runtime_error {
 public:
  IterationError(const std::string& what, double residual,
                 std::vector<double> history = {})
      : std::runtime_error(what + " (residual " + std::to_string(residual) + ")"),
        residual_(residual),
        history_(std::move(history)) {}

  double residual() const { return residual_; }
  const std::vector<double>& history() const { return history_; }

 private:
  double residual_;
  std::vector<double> history_;
};

/// A dense or banded factorization failed (singular pivot, LAPACK info != 0).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace nlsctl
