#pragma once

#include "nlsctl/banded.hpp"
#include "nlsctl/grid.hpp"

namespace nlsctl {

enum class OperatorRole { Laplacian, Lminus, Lplus, Other };

/// Symmetric tridiagonal operator, stored as its diagonal and one off-diagonal.
struct Tridiagonal {
  Field diag;
  Field off;  // size n-1
  OperatorRole role = OperatorRole::Other;

  int size() const { return static_cast<int>(diag.size()); }
  Field apply(const Field& u) const;
  Eigen::VectorXcd apply(const Eigen::VectorXcd& u) const;

  /// Number of eigenvalues strictly below sigma (Sturm sequence count).
  int count_below(double sigma) const;
  /// k-th smallest eigenvalue (0-based) by Sturm bisection.
  double eigenvalue(int k, double tol = 1e-13) const;
  /// Gershgorin bounds on the spectrum.
  std::pair<double, double> spectral_bounds() const;

  /// Band form of alpha*I + beta*T.
  RealBandedMatrix banded(double alpha, double beta) const;
  ComplexBandedMatrix banded(std::complex<double> alpha, std::complex<double> beta) const;

  /// -D2 + potential, with D2 the 3-point Dirichlet Laplacian.
  static Tridiagonal schrodinger(const Grid& grid, const Field& potential,
                                 OperatorRole role = OperatorRole::Other);
};

}  // namespace nlsctl
