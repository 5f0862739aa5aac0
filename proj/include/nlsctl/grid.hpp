#pragma once

#include <Eigen/Dense>

#include <complex>

namespace nlsctl {

using Field = Eigen::VectorXd;
using ComplexField = Eigen::VectorXcd;

/// Uniform grid on (0,1) with homogeneous Dirichlet ends. Only the n interior
/// nodes x_i = i*h (i = 1..n) carry unknowns; x_0 = 0 and x_{n+1} = 1 are
/// implicit zeros everywhere in the library.
class Grid {
 public:
  explicit Grid(int n_interior);

  int size() const { return n_; }
  double h() const { return h_; }
  /// Coordinate of interior node `i` (0-based).
  double node(int i) const { return (i + 1) * h_; }
  Field nodes() const;

  bool operator==(const Grid& other) const { return n_ == other.n_; }

 private:
  int n_;
  double h_;
};

void require_same_size(const Grid& grid, Eigen::Index size, const char* what);

// h-weighted rectangle-rule inner products. With zero boundary values this is
// also the trapezoid rule, and it makes the 3-point Laplacian exactly symmetric.
double inner(const Grid& grid, const Field& u, const Field& v);
std::complex<double> inner(const Grid& grid, const ComplexField& u, const ComplexField& v);
double norm_l2(const Grid& grid, const Field& u);
double norm_l2(const Grid& grid, const ComplexField& u);

/// Forward differences (u_{i+1} - u_i)/h on the n+1 cell edges, boundary zeros included.
Field forward_difference(const Grid& grid, const Field& u);
ComplexField forward_difference(const Grid& grid, const ComplexField& u);
/// Edge average (u_i + u_{i+1})/2, boundary zeros included.
Field edge_average(const Field& u);

double seminorm_h1(const Grid& grid, const Field& u);
double seminorm_h1(const Grid& grid, const ComplexField& u);
double norm_h1(const Grid& grid, const Field& u);
double norm_h1(const Grid& grid, const ComplexField& u);

/// Number of sign changes, ignoring entries below `relative_floor * max|u|`.
int sign_changes(const Field& u, double relative_floor = 1e-10);

/// Second-order three-point Laplacian D2 u with Dirichlet zeros.
Field second_difference(const Grid& grid, const Field& u);

}  // namespace nlsctl
